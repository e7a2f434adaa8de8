"""Detection, localization and classification of bifurcations along branches.

An event is flagged wherever the smallest eigenvalue of L_plus or L_minus
changes sign between consecutive branch points (eigenvalues inside the
numerical kernel band count as zero, so the gauge mode of L_minus never
triggers), or wherever the E-component of the secant tangent flips (fold
suspicion). Localization bisects in arclength with corrector solves;
classification is structural: kernel parity plus tangent behavior.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .continuation import Branch, BranchPoint, extended_norm, make_branch_point, tangent
from .errors import NoConvergence, SwitchFailed
from .grid import Grid, norm_l2
from .model import ModelSpec, potential_eval
from .solver import NewtonOpts, bordered_corrector, newton_fixed_E

log = logging.getLogger(__name__)


@dataclass
class BifurcationEvent:
    bracket: tuple
    point: BranchPoint
    operator: str  # 'L_plus' or 'L_minus'
    parity: str  # 'even' / 'odd' / 'none'
    kind: str  # 'fold' / 'pitchfork_symmetry_breaking' / 'trivial_branch_pitchfork' / 'unresolved'
    seeds: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def _banded_sign(lam: float, band: float) -> int:
    if lam > band:
        return 1
    if lam < -band:
        return -1
    return 0


def detect_events(branch: Branch, band_factor: float = 10.0):
    """Brackets (i, j) where an eigenvalue crosses zero or tau_E flips.

    Tracks the banded signs of lambda_min and lambda2 of L_plus and
    lambda_min of L_minus, plus Morse-count changes as a catch-all for
    deeper crossings. The dead band (band_factor * kernel_tol) keeps
    eigenvalues pinned at numerical zero (the gauge mode of L_minus,
    lattice translation modes) from flapping. A branch that *starts* inside
    the band of some eigenvalue was seeded at that bifurcation, so the
    first interval is not re-reported for that monitor.
    """
    pts = branch.points
    if len(pts) < 2:
        return []
    brackets = []

    def lam_of(point, op, k):
        s = point.spectral
        if op == "L_minus":
            return s.lambda_min_minus
        return s.lambda_min_plus if k == 1 else s.lambda2_plus

    monitors = [("L_plus", 1), ("L_plus", 2), ("L_minus", 1)]
    # a crossing is a strict sign at some point that reverses the last strict
    # sign seen on the same monitor; intervals spent inside the band extend
    # the bracket rather than firing (a branch seeded at a bifurcation has
    # no prior strict sign, so the parent event is not re-reported)
    last_strict = {}
    last_idx = {}
    for mon in monitors:
        op, k = mon
        s0 = _banded_sign(lam_of(pts[0], op, k), band_factor * pts[0].spectral.kernel_tol)
        if s0 != 0:
            last_strict[mon] = s0
            last_idx[mon] = 0
    covered = set()
    for i in range(1, len(pts)):
        b = pts[i]
        band_b = band_factor * b.spectral.kernel_tol
        for mon in monitors:
            op, k = mon
            sb = _banded_sign(lam_of(b, op, k), band_b)
            if sb == 0:
                continue
            if mon in last_strict and last_strict[mon] != sb:
                brackets.append({"i": last_idx[mon], "j": i, "monitor": op, "k": k})
                covered.update((op, j) for j in range(last_idx[mon], i))
            last_strict[mon] = sb
            last_idx[mon] = i
    # catch-all for crossings in eigenvalues deeper than the tracked ones
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        if a.spectral.morse_plus != b.spectral.morse_plus and ("L_plus", i) not in covered:
            if not (i == 0 and _banded_sign(lam_of(a, "L_plus", 1),
                                            band_factor * a.spectral.kernel_tol) == 0):
                k = max(a.spectral.morse_plus, b.spectral.morse_plus)
                if k > 2:
                    brackets.append({"i": i, "j": i + 1, "monitor": "L_plus", "k": k})
        if a.spectral.morse_minus != b.spectral.morse_minus and ("L_minus", i) not in covered:
            k = max(a.spectral.morse_minus, b.spectral.morse_minus)
            if k > 1:
                brackets.append({"i": i, "j": i + 1, "monitor": "L_minus", "k": k})
    for i in range(1, len(pts) - 1):
        dE_prev = pts[i].E - pts[i - 1].E
        dE_next = pts[i + 1].E - pts[i].E
        if dE_prev * dE_next < 0.0:
            if not any(b["i"] <= i <= b["j"] for b in brackets):
                brackets.append({"i": i - 1, "j": i + 1, "monitor": "tau_E", "k": 1})
    # L_plus first: its refinement carries the kernel parity, so when a
    # coincident L_minus crossing is deduplicated the richer event survives
    brackets.sort(key=lambda b: (b["i"], b["monitor"] != "L_plus", b["monitor"], b["k"]))
    return brackets


def _eigen_monitor(g: Grid, m: ModelSpec, point: BranchPoint, operator: str, k: int,
                   V: np.ndarray) -> float:
    """k-th smallest eigenvalue of the crossing operator at a branch point."""
    s = point.spectral
    if operator == "L_minus":
        if k == 1:
            return s.lambda_min_minus
    else:
        if k == 1:
            return s.lambda_min_plus
        if k == 2:
            return s.lambda2_plus
    from .model import linearization
    from .spectral import smallest_eigenvalues

    l_plus, l_minus = linearization(g, m, point.phi, point.E, V=V)
    T = l_minus if operator == "L_minus" else l_plus
    return smallest_eigenvalues(T, k)[k - 1]


def locate_event(
    g: Grid,
    m: ModelSpec,
    branch: Branch,
    bracket: dict,
    event_tol: float | None = None,
    ds_min: float = 1e-6,
    newton_opts: NewtonOpts | None = None,
    max_bisect: int = 60,
) -> BifurcationEvent:
    """Refine a bracket to a point where the crossing eigenvalue is ~ 0.

    Bisection in arclength: corrector solutions are inserted at midpoints of
    the bracket until the monitored eigenvalue magnitude falls below
    event_tol or the bracket width falls below ds_min.
    """
    if newton_opts is None:
        newton_opts = NewtonOpts()
    V = potential_eval(m.potential, g)
    pa = branch.points[bracket["i"]]
    pb = branch.points[bracket["j"]]
    operator = bracket["monitor"]
    k = bracket.get("k", 1)
    fold_suspect = operator == "tau_E"
    if fold_suspect:
        # folds show up as an (even-kernel) L_plus crossing
        operator = "L_plus"

    la = _eigen_monitor(g, m, pa, operator, k, V)
    lb = _eigen_monitor(g, m, pb, operator, k, V)
    if la * lb > 0.0 and not fold_suspect:
        return _unresolved(bracket, pa, operator, "no sign change at bracket ends")

    best, lbest = (pa, la) if abs(la) < abs(lb) else (pb, lb)
    for _ in range(max_bisect):
        tol = event_tol
        if tol is None:
            tol = 1e-8 * _op_norm(g, m, best, V)
        if abs(lbest) <= tol:
            break
        width = extended_norm(g, pb.phi - pa.phi, pb.E - pa.E)
        if width <= ds_min:
            break
        tau = tangent(g, pa, pb)
        mid_phi = 0.5 * (pa.phi + pb.phi)
        mid_E = 0.5 * (pa.E + pb.E)
        try:
            phi_c, E_c = bordered_corrector(
                g, m, (mid_phi, mid_E), tau, 0.0, opts=newton_opts, V=V
            )
        except NoConvergence:
            return _unresolved(bracket, best, operator, "corrector failed inside bracket")
        pmid = make_branch_point(g, m, phi_c, E_c, V=V)
        lmid = _eigen_monitor(g, m, pmid, operator, k, V)
        if abs(lmid) < abs(lbest):
            best, lbest = pmid, lmid
        if la * lmid <= 0.0:
            pb, lb = pmid, lmid
        elif lmid * lb <= 0.0:
            pa, la = pmid, lmid
        else:
            return _unresolved(bracket, best, operator, "bracket lost during refinement")

    spec = best.spectral
    parity = "none"
    kvec = spec.kernel_vector_plus
    if operator == "L_plus" and kvec is not None:
        parity = spec.kernel_parity
    kind = _classify(g, best, parity, fold_suspect)
    return BifurcationEvent(
        bracket=(bracket["i"], bracket["j"]),
        point=best,
        operator=operator,
        parity=parity,
        kind=kind,
        diagnostics={
            "monitor": bracket["monitor"],
            "k": k,
            "lambda_at_event": lbest,
        },
    )


def _op_norm(g: Grid, m: ModelSpec, point: BranchPoint, V: np.ndarray) -> float:
    from .model import linearization

    l_plus, _ = linearization(g, m, point.phi, point.E, V=V)
    return l_plus.inf_norm()


def _unresolved(bracket, point, operator, why) -> BifurcationEvent:
    return BifurcationEvent(
        bracket=(bracket["i"], bracket["j"]),
        point=point,
        operator=operator,
        parity="none",
        kind="unresolved",
        diagnostics={
            "reason": why,
            "monitor": bracket["monitor"],
            "k": bracket.get("k", 1),
            "lambda_at_event": float("nan"),
        },
    )


def _classify(g: Grid, point: BranchPoint, parity: str, fold_suspect: bool) -> str:
    amp = norm_l2(g, point.phi)
    if amp <= 1e-6:
        return "trivial_branch_pitchfork"
    if parity == "odd":
        return "pitchfork_symmetry_breaking"
    if fold_suspect or parity == "even":
        return "fold"
    return "unresolved"


def switch_branch(
    g: Grid,
    m: ModelSpec,
    event: BifurcationEvent,
    s: float | None = None,
    dE: float | None = None,
    newton_opts: NewtonOpts | None = None,
    ds_min: float = 1e-6,
    max_growth: int = 7,
):
    """Seeds for the branches emerging from a pitchfork event.

    For each sign, the kick phi* +- s*k is corrected with the kernel
    amplitude pinned: the bordered system with tangent (k, 0) forbids
    collapsing back onto the parent (whose kernel component is ~ 0) while E
    floats to wherever the child lives. Each solution is then polished at
    fixed E, must stay away from the fixed-E-corrected parent, and sign
    duplicates are dropped (phi and -phi are one state modulo rotation).
    The kick amplitude grows a few times if candidates keep collapsing.
    """
    if event.kind not in ("pitchfork_symmetry_breaking", "trivial_branch_pitchfork"):
        raise ValueError(f"cannot switch at event of kind {event.kind!r}")
    kvec = event.point.spectral.kernel_vector_plus
    if kvec is None:
        raise SwitchFailed("no kernel vector available at the event")
    if newton_opts is None:
        newton_opts = NewtonOpts()
    V = potential_eval(m.potential, g)
    phi_star = event.point.phi
    E_star = event.point.E
    amp = norm_l2(g, phi_star)
    # absolute floor keeps trivial-branch events (amp = 0) workable
    if s is None:
        s = max(1e-3 * amp, 1e-3)
    del dE  # probe offsets in E are implied by the pinned-kernel correction
    khat = kvec / norm_l2(g, kvec)

    for attempt in range(max_growth):
        kick = s * 4.0**attempt
        seeds = []
        for sgn in (+1.0, -1.0):
            guess = phi_star + sgn * kick * khat
            try:
                phi_b, E_b = bordered_corrector(
                    g, m, (guess, E_star), (sgn * khat, 0.0), kick,
                    opts=newton_opts, V=V,
                )
                if E_b <= 0:
                    continue
                phi_c = newton_fixed_E(g, m, phi_b, E_b, opts=newton_opts, V=V)
                E_c = E_b
            except Exception:
                continue
            try:
                parent_c = newton_fixed_E(g, m, phi_star, E_c, opts=newton_opts, V=V)
            except Exception:
                parent_c = phi_star
            # the pinned kernel amplitude puts a genuine child at distance
            # ~ kick from the parent; anything much closer collapsed back
            dist = norm_l2(g, phi_c - parent_c)
            if dist <= 0.5 * kick:
                continue
            if any(
                norm_l2(g, phi_c - q) <= 0.5 * kick or norm_l2(g, phi_c + q) <= 0.5 * kick
                for q, _ in seeds
            ):
                continue
            seeds.append((phi_c, E_c))
        if seeds:
            event.seeds = seeds
            return seeds
    raise SwitchFailed(
        f"all switch candidates collapsed onto the parent branch at E* = {E_star}"
        " (event_tol may be too loose)"
    )
