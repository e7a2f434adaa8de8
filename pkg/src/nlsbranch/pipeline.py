"""Diagram and suite drivers: trace everything, classify, persist.

run_diagram seeds the trivial branch, locates the bifurcation at E0, and
processes events recursively (locate, switch, trace children, classify)
until no unprocessed events remain or the branch budget is reached. The
suites post-process diagram artifacts: scaling checkpoints, rescaled limit
profiles, stability probes, and the variational mu-scan.
"""

import logging
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import io
from .asymptotics import (
    infer_placements,
    limit_profile,
    limit_profile_residual,
    predicted_morse,
    rescale_profile,
    scaling_diagnostics,
)
from .bifurcation import detect_events, locate_event, switch_branch
from .config import RunConfig
from .continuation import (
    Branch,
    ContinuationControls,
    make_branch_point,
    trace_branch,
)
from .errors import (
    NoConvergence,
    NoLinearBoundState,
    StalledBranch,
    SwitchFailed,
    ToolkitError,
)
from .evolution import stability_probe
from .grid import Grid, build_grid, norm_h1
from .model import ModelSpec, PotentialSpec, critical_points, potential_eval
from .solver import NewtonOpts, newton_fixed_E
from .spectral import lowest_state
from .stability import annotate_branch
from .tridiag import SymTridiag, free_laplacian
from .variational import charge_scan, minimize_at_charge

log = logging.getLogger(__name__)


@dataclass
class DiagramResult:
    grid: Grid
    model: ModelSpec
    branches: dict  # id -> Branch
    events: list  # io.event_record dicts
    summary: dict
    failures: list = field(default_factory=list)


def build_problem(cfg: RunConfig):
    g = build_grid(cfg.grid["L"], int(cfg.grid["N"]))
    pot = cfg.model["potential"]
    spec = PotentialSpec(
        kind=pot["kind"],
        depth=pot["depth"],
        separation=pot["separation"],
        width=pot["width"],
    )
    m = ModelSpec(potential=spec, gamma=cfg.model["gamma"], p=cfg.model["p"])
    return g, m


def _controls(cfg: RunConfig) -> ContinuationControls:
    c = cfg.continuation
    return ContinuationControls(
        ds_init=c["ds_init"],
        ds_min=c["ds_min"],
        ds_max=c["ds_max"],
        E_min=c["E_min"],
        E_max=c["E_max"],
        norm_max=c["norm_max"],
        max_steps=int(c["max_steps"]),
    )


def _newton_opts(cfg: RunConfig) -> NewtonOpts:
    return NewtonOpts(tol_residual=cfg.tolerances["tol_residual"])


def _trivial_window(g: Grid, m: ModelSpec, controls: ContinuationControls):
    """E-range for the trivial branch: bracket E0 when (SA) holds."""
    V = potential_eval(m.potential, g)
    lap = free_laplacian(g)
    lam, _ = lowest_state(g, SymTridiag(lap.d + V, lap.e))
    if lam >= 0:
        raise NoLinearBoundState(
            "-Laplacian + V has no negative eigenvalue: no trivial-branch bifurcation"
        )
    E0 = -lam
    lo = max(controls.E_min, 0.5 * E0)
    hi = min(controls.E_max, E0 + max(0.5, 0.2 * E0))
    return lo, hi, E0


def _trace(g, m, start, direction, controls, nopts, seed_info, initial_tangent=None):
    br = trace_branch(
        g, m, start, direction, controls, nopts,
        seed_info=seed_info, initial_tangent=initial_tangent,
    )
    return br


def run_diagram(cfg: RunConfig, out_dir: str | None = None) -> DiagramResult:
    """Trace the full diagram; optionally persist artifacts to out_dir."""
    g, m = build_problem(cfg)
    controls = _controls(cfg)
    nopts = _newton_opts(cfg)
    event_tol = cfg.tolerances["event_tol"]
    rng_seed = int(cfg.seed)

    branches: dict = {}
    event_records: list = []
    failures: list = []
    queue: list = []  # branch ids awaiting event processing

    def register(branch: Branch) -> str:
        bid = f"branch_{len(branches):03d}"
        branches[bid] = branch
        queue.append(bid)
        return bid

    # 1. trivial branch across its bifurcation window
    if cfg.seeds.get("trivial", True):
        lo, hi, E0 = _trivial_window(g, m, controls)
        triv_controls = ContinuationControls(
            ds_init=controls.ds_init,
            ds_min=controls.ds_min,
            ds_max=controls.ds_max,
            E_min=0.5 * lo,
            E_max=hi,
            norm_max=controls.norm_max,
            max_steps=controls.max_steps,
        )
        triv = _trace(
            g, m, (np.zeros(g.N), lo), +1, triv_controls, nopts,
            {"kind": "trivial", "E0_estimate": E0},
        )
        register(triv)

    # explicit profile seed
    ex = cfg.seeds.get("explicit")
    if ex is not None:
        _, phi = io.read_profile_csv(ex["profile"])
        phi = newton_fixed_E(g, m, phi, ex["E"], opts=nopts)
        for direction in (+1, -1):
            br = _trace(g, m, (phi, ex["E"]), direction, controls, nopts,
                        {"kind": "explicit", "E": ex["E"], "direction": direction})
            register(br)

    # variational seed
    var = cfg.seeds.get("variational")
    if var is not None:
        init = np.exp(-g.x**2)
        phi_v, E_v, _ = minimize_at_charge(g, m, var["mu"], init)
        phi_v = newton_fixed_E(g, m, phi_v, E_v, opts=nopts)
        for direction in (+1, -1):
            br = _trace(g, m, (phi_v, E_v), direction, controls, nopts,
                        {"kind": "variational", "mu": var["mu"], "direction": direction})
            register(br)

    # 2. process events breadth-first until the budget is spent
    processed = 0
    while processed < len(queue) and len(branches) < cfg.budget:
        bid = queue[processed]
        processed += 1
        branch = branches[bid]
        try:
            brackets = detect_events(branch)
        except ToolkitError as exc:
            failures.append({"branch": bid, "stage": "detect", "error": str(exc)})
            continue
        located = []
        for bracket in brackets:
            if len(branches) >= cfg.budget:
                break
            try:
                event = locate_event(
                    g, m, branch, bracket,
                    event_tol=event_tol, ds_min=controls.ds_min, newton_opts=nopts,
                )
            except ToolkitError as exc:
                failures.append({"branch": bid, "stage": "locate", "error": str(exc)})
                continue
            # coincident crossings (L_plus and L_minus agree on the trivial
            # branch) refine to the same location: keep the first
            dedup_tol = max(100.0 * controls.ds_min, 1e-7 * (1.0 + abs(event.point.E)))
            if any(
                prev.kind == event.kind and abs(prev.point.E - event.point.E) <= dedup_tol
                for prev in located
            ):
                continue
            located.append(event)
            branch.events.append(event)
            children = []
            if event.kind in ("pitchfork_symmetry_breaking", "trivial_branch_pitchfork"):
                try:
                    seeds = switch_branch(
                        g, m, event,
                        s=cfg.seeds.get("amplitude") if event.kind == "trivial_branch_pitchfork" else None,
                        newton_opts=nopts, ds_min=controls.ds_min,
                    )
                except (SwitchFailed, ToolkitError) as exc:
                    failures.append({"branch": bid, "stage": "switch", "error": str(exc)})
                    seeds = []
                for sphi, sE in seeds:
                    if len(branches) >= cfg.budget:
                        break
                    tangent0 = (sphi - event.point.phi, sE - event.point.E)
                    try:
                        child = _trace(
                            g, m, (sphi, sE), +1, controls, nopts,
                            {"kind": "switch", "parent": bid, "event_E": event.point.E,
                             "event_kind": event.kind},
                            initial_tangent=tangent0,
                        )
                    except (StalledBranch, NoConvergence, ToolkitError) as exc:
                        failures.append({"branch": bid, "stage": "child-trace", "error": str(exc)})
                        continue
                    children.append(register(child))
            event_records.append(io.event_record(bid, event, children))

    # 3. stability tags
    slope_tol = cfg.tolerances["slope_tol"]
    segments = {}
    for bid, branch in branches.items():
        segments[bid] = [
            [int(a), int(b), tag] for a, b, tag in annotate_branch(branch, slope_tol)
        ]

    summary = {
        "config": cfg.to_dict(),
        "rng_seed": rng_seed,
        "branches": {
            bid: {
                "points": len(br.points),
                "seed": {k: (v if not isinstance(v, float) else float(v))
                         for k, v in br.seed_info.items()},
                "termination": br.termination,
                "E_first": float(br.points[0].E),
                "E_last": float(br.points[-1].E),
                "E_min": float(br.E_values.min()),
                "E_max": float(br.E_values.max()),
                "Q_max": float(br.Q_values.max()),
                "final_asymmetry": float(br.points[-1].asymmetry),
                "morse_plus_range": [
                    int(min(p.spectral.morse_plus for p in br.points)),
                    int(max(p.spectral.morse_plus for p in br.points)),
                ],
                "stability_segments": segments[bid],
                "events": [int(e.bracket[0]) for e in br.events],
            }
            for bid, br in branches.items()
        },
        "events": event_records,
        "failures": failures,
    }

    result = DiagramResult(
        grid=g, model=m, branches=branches, events=event_records,
        summary=summary, failures=failures,
    )
    if out_dir is not None:
        persist_diagram(result, cfg, out_dir)
    return result


def persist_diagram(result: DiagramResult, cfg: RunConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    every = max(1, int(cfg.output.get("profile_every", 10)))
    g = result.grid
    for bid, branch in sorted(result.branches.items()):
        io.write_branch_csv(os.path.join(out_dir, f"{bid}.csv"), branch)
        pdir = os.path.join(out_dir, "profiles", bid)
        n = len(branch.points)
        for i, p in enumerate(branch.points):
            if i % every == 0 or i == n - 1:
                io.write_profile_csv(
                    os.path.join(pdir, f"point_{i:05d}.csv"), g.x, p.phi
                )
    io.write_json(os.path.join(out_dir, "events.json"), result.events)
    io.write_json(os.path.join(out_dir, "summary.json"), result.summary)


def load_branch_profiles(out_dir: str, bid: str):
    """Stored (index, x, phi) triples for one branch, ordered by index."""
    pdir = os.path.join(out_dir, "profiles", bid)
    if not os.path.isdir(pdir):
        return []
    out = []
    for name in sorted(os.listdir(pdir)):
        if name.startswith("point_") and name.endswith(".csv"):
            idx = int(name[len("point_"):-len(".csv")])
            x, phi = io.read_profile_csv(os.path.join(pdir, name))
            out.append((idx, x, phi))
    return out


def _auto_branch(summary: dict, want_asymmetric: bool = True) -> str:
    """Deterministic branch selection: largest final E among candidates.

    Asymmetric means mirror-broken ground branches (asymmetry strictly
    between 0.1 and 1.9); odd excited branches sit at asymmetry ~ 2 and are
    excluded from both choices.
    """
    cands = []
    for bid, info in summary["branches"].items():
        if info["Q_max"] <= 0:
            continue  # trivial branch
        asym = info["final_asymmetry"]
        if want_asymmetric and 0.1 < asym < 1.9:
            cands.append((info["E_max"], bid))
        elif not want_asymmetric and asym <= 0.1:
            cands.append((info["E_max"], bid))
    if not cands:
        raise ToolkitError("no branch matches the suite's selection rule")
    cands.sort()
    return cands[-1][1]


def _point_at_E(g, m, out_dir, bid, E_target, nopts):
    profs = load_branch_profiles(out_dir, bid)
    if not profs:
        raise ToolkitError(f"no stored profiles for {bid}")
    rows = io.read_branch_csv(os.path.join(out_dir, f"{bid}.csv"))
    E_of = {r["index"]: r["E"] for r in rows}
    best = min(profs, key=lambda t: abs(E_of.get(t[0], np.inf) - E_target))
    phi = newton_fixed_E(g, m, best[2], E_target, opts=nopts)
    return make_branch_point(g, m, phi, E_target)


def run_scaling_suite(cfg: RunConfig, out_dir: str) -> dict:
    """Scaling rows at the configured checkpoints plus extrapolated limits."""
    g, m = build_problem(cfg)
    nopts = _newton_opts(cfg)
    summary = io.read_json(os.path.join(out_dir, "summary.json"))
    bid = cfg.suite.get("branch") or _auto_branch(summary, want_asymmetric=True)
    checkpoints = [float(E) for E in cfg.suite["scaling_E"]]
    pts = [_point_at_E(g, m, out_dir, bid, E, nopts) for E in checkpoints]
    diag = scaling_diagnostics(g, m, pts)
    target_q = -m.gamma * ((2 - 1) * m.p + 4.0) / (2.0 * m.p + 4.0)
    target_k = -m.gamma * 1 * m.p / (2.0 * m.p + 4.0)
    report = {
        "branch": bid,
        "rows": [
            {"E": r.E, "s_nl": r.s_nl, "s_Q": r.s_Q, "s_K": r.s_K,
             "r_Q": r.r_Q, "r_K": r.r_K}
            for r in diag.rows
        ],
        "r_Q_limit": diag.r_Q_limit,
        "r_K_limit": diag.r_K_limit,
        "r_Q_target": target_q,
        "r_K_target": target_k,
        "r_Q_rel_err": abs(diag.r_Q_limit - target_q) / abs(target_q),
        "r_K_rel_err": abs(diag.r_K_limit - target_k) / abs(target_k),
    }
    report["pass"] = bool(report["r_Q_rel_err"] <= 0.05 and report["r_K_rel_err"] <= 0.05)
    lines = ["E,s_nl,s_Q,s_K,r_Q,r_K"]
    for r in diag.rows:
        lines.append(",".join(io.fmt(v) for v in (r.E, r.s_nl, r.s_Q, r.s_K, r.r_Q, r.r_K)))
    io.atomic_write_text(os.path.join(out_dir, f"scaling_{bid}.csv"), "\n".join(lines) + "\n")
    io.write_json(os.path.join(out_dir, "scaling_report.json"), report)
    return report


def run_rescale_suite(cfg: RunConfig, out_dir: str) -> dict:
    """Rescaled limit profiles at checkpoints: residuals and sech distances."""
    g, m = build_problem(cfg)
    nopts = _newton_opts(cfg)
    summary = io.read_json(os.path.join(out_dir, "summary.json"))
    bid = cfg.suite.get("branch") or _auto_branch(summary, want_asymmetric=True)
    crit = critical_points(m.potential, g.L)
    minima = [c[0] for c in crit if c[1] == "minimum"]
    rows = []
    for E in [float(E) for E in cfg.suite["rescale_E"]]:
        pt = _point_at_E(g, m, out_dir, bid, E, nopts)
        x_peak = float(g.x[np.argmax(np.abs(pt.phi))])
        if minima:
            x0 = min(minima, key=lambda c: abs(c - x_peak))
        else:
            x0 = x_peak
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref, psi = rescale_profile(g, m, pt.phi, E, x0)
        res = limit_profile_residual(ref, psi, m)
        h1d = norm_h1(ref, psi - limit_profile(ref, m)) if m.gamma < 0 else float("nan")
        place, _ = infer_placements(g, m, pt.phi)
        rows.append(
            {
                "E": E,
                "x0": x0,
                "ev0_residual": res,
                "h1_dist_to_limit": h1d,
                "morse_plus": pt.spectral.morse_plus,
                "placements": place,
                "predicted_morse": predicted_morse(place),
            }
        )
        io.write_profile_csv(
            os.path.join(out_dir, f"rescaled_{bid}_E{int(round(E))}.csv"), ref.x, psi
        )
    report = {"branch": bid, "rows": rows}
    io.write_json(os.path.join(out_dir, "rescale_report.json"), report)
    return report


def _segment_probe_points(rows, segments):
    """Representative CSV row index per stability segment (the midpoint)."""
    picks = []
    for a, b, tag in segments:
        if tag == "indeterminate":
            continue
        picks.append((int((a + b) // 2), tag))
    return picks


def run_probe_suite(cfg: RunConfig, out_dir: str) -> dict:
    """Dynamic probes of tagged points: verdicts must match the tags."""
    g, m = build_problem(cfg)
    nopts = _newton_opts(cfg)
    summary = io.read_json(os.path.join(out_dir, "summary.json"))
    ev = cfg.evolution
    directions = list(cfg.suite.get("probe_directions", ["lplus_ground"]))
    results = []
    for bid in sorted(summary["branches"]):
        info = summary["branches"][bid]
        if info["Q_max"] <= 0:
            continue
        rows = io.read_branch_csv(os.path.join(out_dir, f"{bid}.csv"))
        profs = load_branch_profiles(out_dir, bid)
        if not profs:
            continue
        stored = {idx for idx, _, _ in profs}
        for row_idx, tag in _segment_probe_points(rows, info["stability_segments"]):
            near = min(stored, key=lambda i: abs(i - row_idx))
            E = rows[near]["E"]
            phi0 = next(p for i, _, p in profs if i == near)
            phi = newton_fixed_E(g, m, phi0, E, opts=nopts)
            point = make_branch_point(g, m, phi, E)
            for direction in directions:
                # stable points must stay bounded under every probe; an
                # unstable verdict is demanded only where the probe actually
                # excites the unstable manifold: a mirror-antisymmetric kick
                # at a mirror-symmetric saddle. Other unstable probes are
                # recorded as informational.
                if tag == "stable":
                    decisive, expected = True, "bounded"
                elif direction == "mirror_antisymmetric" and point.asymmetry < 0.1:
                    decisive, expected = True, "departed"
                else:
                    decisive, expected = False, None
                pr = stability_probe(
                    g, m, point, direction=direction,
                    eps=ev["eps"], T=ev["T"], dt=ev["dt"], seed=int(cfg.seed),
                    sample_every=int(ev["sample_every"]),
                )
                results.append(
                    {
                        "branch": bid,
                        "index": int(near),
                        "E": float(E),
                        "tag": tag,
                        "direction": direction,
                        "verdict": pr.verdict,
                        "max_excursion_over_eps": pr.max_excursion / max(pr.eps, 1e-300),
                        "decisive": decisive,
                        "consistent": bool(pr.verdict == expected) if decisive else None,
                    }
                )
    report = {
        "probes": results,
        "pass": bool(all(r["consistent"] for r in results if r["decisive"])),
    }
    io.write_json(os.path.join(out_dir, "probe_report.json"), report)
    return report


def run_varscan_suite(cfg: RunConfig, out_dir: str) -> dict:
    """Constrained-minimization scan over mu with the asymmetry transition."""
    g, m = build_problem(cfg)
    mus = [float(v) for v in cfg.scan["mu_values"]]
    rows = charge_scan(g, m, mus)
    lines = ["mu,E,energy,asymmetry,iterations"]
    for r in rows:
        lines.append(
            ",".join(
                [io.fmt(r["mu"]), io.fmt(r["E"]), io.fmt(r["energy"]),
                 io.fmt(r["asymmetry"]), str(r["iterations"])]
            )
        )
    io.atomic_write_text(os.path.join(out_dir, "varscan.csv"), "\n".join(lines) + "\n")
    below = [r["mu"] for r in rows if r["asymmetry"] <= 1e-6]
    above = [r["mu"] for r in rows if r["asymmetry"] >= 1e-1]
    middle = [r["mu"] for r in rows if 1e-6 < r["asymmetry"] < 1e-1]
    transition = bool(below and above and not middle and max(below) < min(above))
    report = {
        "rows": rows,
        "transition": transition,
        "mu_star_bracket": [max(below), min(above)] if transition else None,
    }
    io.write_json(os.path.join(out_dir, "varscan_report.json"), report)
    return report


def run_evolve_suite(cfg: RunConfig, out_dir: str) -> dict:
    """Propagate a representative stable point and record the trajectory."""
    from .evolution import evolve, orbital_distance

    g, m = build_problem(cfg)
    nopts = _newton_opts(cfg)
    summary = io.read_json(os.path.join(out_dir, "summary.json"))
    bid = cfg.suite.get("branch") or _auto_branch(summary, want_asymmetric=True)
    info = summary["branches"][bid]
    E = info["E_max"] if info["E_max"] < 10 else min(10.0, info["E_max"])
    point = _point_at_E(g, m, out_dir, bid, E, nopts)
    ev = cfg.evolution
    traj = evolve(
        g, m, point.phi.astype(complex), T=ev["T"], dt=ev["dt"],
        sample_every=int(ev["sample_every"]), reference=point.phi,
    )
    lines = ["t,Q,energy,orbital_distance"]
    dists = [0.0] + [d[0] for d in traj.samples]
    for t, q, en, d in zip(traj.times, traj.Q, traj.energy, dists):
        lines.append(",".join(io.fmt(v) for v in (t, q, en, d)))
    io.atomic_write_text(os.path.join(out_dir, f"trajectory_{bid}.csv"), "\n".join(lines) + "\n")
    q_drift = float(np.max(np.abs(traj.Q - traj.Q[0])) / max(traj.Q[0], 1e-300) / max(ev["T"], 1.0))
    report = {
        "branch": bid,
        "E": float(E),
        "Q_drift_per_unit_time": q_drift,
        "max_orbital_distance": float(max(dists)),
    }
    io.write_json(os.path.join(out_dir, "evolve_report.json"), report)
    return report
