"""Artifact persistence: branch CSVs, profile CSVs, event and summary JSON.

All floats are written with repr (shortest round-trip form), all writes are
atomic (temp file + rename), and every serialization is a pure function of
the computed data, so identical runs produce identical bytes.
"""

import json
import os
import tempfile

import numpy as np

from .continuation import Branch

BRANCH_CSV_HEADER = (
    "index,E,Q,energy,kinetic,potential,nonlinear,morse_plus,morse_minus,"
    "lambda_min_plus,lambda_min_minus,slope_dQdE,pohozaev,asymmetry,stability"
)


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def branch_csv_text(branch: Branch) -> str:
    lines = [BRANCH_CSV_HEADER]
    for i, p in enumerate(branch.points):
        s = p.spectral
        lines.append(
            ",".join(
                [
                    str(i),
                    fmt(p.E),
                    fmt(p.Q),
                    fmt(p.energy),
                    fmt(p.kinetic),
                    fmt(p.potential),
                    fmt(p.nonlinear),
                    str(s.morse_plus),
                    str(s.morse_minus),
                    fmt(s.lambda_min_plus),
                    fmt(s.lambda_min_minus),
                    fmt(p.slope_dQdE),
                    fmt(p.pohozaev),
                    fmt(p.asymmetry),
                    p.stability,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_branch_csv(path: str, branch: Branch) -> None:
    atomic_write_text(path, branch_csv_text(branch))


def read_branch_csv(path: str):
    """Rows of the branch CSV as dicts keyed by the header names."""
    with open(path) as f:
        header = f.readline().strip()
        if header != BRANCH_CSV_HEADER:
            raise ValueError(f"unexpected branch CSV header in {path}")
        names = header.split(",")
        rows = []
        for line in f:
            parts = line.strip().split(",")
            row = {}
            for name, val in zip(names, parts):
                if name == "stability":
                    row[name] = val
                elif name in ("index", "morse_plus", "morse_minus"):
                    row[name] = int(val)
                else:
                    row[name] = float(val)
            rows.append(row)
    return rows


def write_profile_csv(path: str, x: np.ndarray, phi: np.ndarray) -> None:
    lines = ["x,phi"]
    for xi, pi in zip(x, phi):
        lines.append(f"{fmt(xi)},{fmt(pi)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_profile_csv(path: str):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, 0], data[:, 1]


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str):
    with open(path) as f:
        return json.load(f)


def event_record(branch_id: str, event, children=None) -> dict:
    return {
        "branch": branch_id,
        "bracket": list(event.bracket),
        "E": float(event.point.E),
        "Q": float(event.point.Q),
        "operator": event.operator,
        "parity": event.parity,
        "kind": event.kind,
        "lambda_at_event": float(event.diagnostics.get("lambda_at_event", float("nan"))),
        "children": list(children or []),
    }
