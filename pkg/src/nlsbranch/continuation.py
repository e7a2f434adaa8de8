"""Pseudo-arclength tracing of solution branches in (phi, E).

A branch is parametrized by arclength in the extended space (phi, E) with
the grid inner product on the phi part, so folds (turning points in E) are
traversed smoothly. Secant predictor, bordered corrector, multiplicative
step control.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, StalledBranch, StepUnderflow
from .grid import Grid, inner_product, norm_h1, norm_l2
from .model import ModelSpec, energy, linearization, pohozaev_residual, potential_eval, residual
from .solver import NewtonOpts, bordered_corrector, effective_tol
from .spectral import SpectralSummary, summarize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContinuationControls:
    ds_init: float = 0.05
    ds_min: float = 1e-6
    ds_max: float = 1.0
    E_min: float = 1e-3
    E_max: float = 200.0
    norm_max: float = 1e6
    max_steps: int = 5000
    loop_tol: float = 1e-6


@dataclass
class BranchPoint:
    """One converged solution record along a branch."""

    phi: np.ndarray = field(repr=False)
    E: float = 0.0
    Q: float = 0.0
    energy: float = 0.0
    kinetic: float = 0.0
    potential: float = 0.0
    nonlinear: float = 0.0
    spectral: SpectralSummary | None = None
    slope_dQdE: float = float("nan")
    pohozaev: float = 0.0
    asymmetry: float = 0.0
    stability: str = "untagged"
    residual_norm: float = 0.0


@dataclass
class Branch:
    points: list
    seed_info: dict
    events: list = field(default_factory=list)
    termination: str = ""

    def __len__(self):
        return len(self.points)

    @property
    def E_values(self):
        return np.array([p.E for p in self.points])

    @property
    def Q_values(self):
        return np.array([p.Q for p in self.points])


def profile_asymmetry(g: Grid, phi: np.ndarray) -> float:
    n = norm_l2(g, phi)
    if n == 0.0:
        return 0.0
    return norm_l2(g, phi - g.mirror(phi)) / n


def _adjoint_slope(g: Grid, l_plus, phi: np.ndarray) -> float:
    """dQ/dE = (phi, w) with L_plus w = -phi (differentiates F(phi(E), E) = 0)."""
    try:
        w = l_plus.solve(-phi)
    except Exception:
        return float("nan")
    if not np.all(np.isfinite(w)):
        return float("nan")
    return float(np.real(inner_product(g, phi, w)))


def make_branch_point(g: Grid, m: ModelSpec, phi: np.ndarray, E: float,
                      V: np.ndarray | None = None) -> BranchPoint:
    """Assemble the full monitored record at a converged (phi, E)."""
    if V is None:
        V = potential_eval(m.potential, g)
    r = residual(g, m, phi, E, V=V)
    f = energy(g, m, phi, V=V)
    l_plus, l_minus = linearization(g, m, phi, E, V=V)
    spec = summarize(g, l_plus, l_minus)
    return BranchPoint(
        phi=phi,
        E=float(E),
        Q=f.charge,
        energy=f.energy,
        kinetic=f.kinetic,
        potential=f.potential,
        nonlinear=f.nonlinear,
        spectral=spec,
        slope_dQdE=_adjoint_slope(g, l_plus, phi),
        pohozaev=pohozaev_residual(g, m, phi, E, V=V),
        asymmetry=profile_asymmetry(g, phi),
        residual_norm=float(np.max(np.abs(r))),
    )


def extended_norm(g: Grid, dphi: np.ndarray, dE: float) -> float:
    return float(np.sqrt(g.h * np.dot(dphi, dphi) + dE * dE))


def tangent(g: Grid, prev: BranchPoint, cur: BranchPoint):
    """Unit secant tangent from prev to cur in the extended inner product."""
    dphi = cur.phi - prev.phi
    dE = cur.E - prev.E
    n = extended_norm(g, dphi, dE)
    if n == 0.0:
        raise ValueError("tangent of coincident points")
    return dphi / n, dE / n


def _initial_tangent(g: Grid, m: ModelSpec, point: BranchPoint, direction: int,
                     V: np.ndarray):
    """E-parametrized tangent (dphi/dE, 1), normalized and oriented.

    When the profile has definite mirror parity, dphi/dE inherits it, so the
    solve is projected onto that parity: this strips spurious components
    along numerically-null modes of opposite parity (lattice translation
    modes on the V = 0 family).
    """
    l_plus, _ = linearization(g, m, point.phi, point.E, V=V)
    try:
        w = l_plus.solve(-point.phi)
        if not np.all(np.isfinite(w)):
            w = np.zeros_like(point.phi)
    except Exception:
        w = np.zeros_like(point.phi)
    nphi = norm_l2(g, point.phi)
    if nphi > 0:
        rev = g.mirror(point.phi)
        if norm_l2(g, point.phi - rev) <= 1e-8 * nphi:
            w = 0.5 * (w + g.mirror(w))
        elif norm_l2(g, point.phi + rev) <= 1e-8 * nphi:
            w = 0.5 * (w - g.mirror(w))
    n = extended_norm(g, w, 1.0)
    return direction * w / n, direction * 1.0 / n


def adapt_step(ds: float, newton_iters: int, success: bool, controls: ContinuationControls) -> float:
    """Multiplicative step control: grow after easy steps, halve after hard/failed ones."""
    if not success:
        if ds <= controls.ds_min * (1.0 + 1e-12):
            raise StepUnderflow(f"arclength step underflow at ds = {ds}")
        return max(ds / 2.0, controls.ds_min)
    if newton_iters <= 3:
        ds = ds * 1.3
    elif newton_iters > 8:
        ds = ds / 2.0
    return float(np.clip(ds, controls.ds_min, controls.ds_max))


def trace_branch(
    g: Grid,
    m: ModelSpec,
    start,
    direction: int = +1,
    controls: ContinuationControls | None = None,
    newton_opts: NewtonOpts | None = None,
    seed_info: dict | None = None,
    initial_tangent=None,
) -> Branch:
    """Trace one branch from a converged start point until a termination event.

    start = (phi, E) with ||F(phi, E)||_inf at solver tolerance. direction
    sets the initial E-orientation unless an explicit initial_tangent
    (tau_phi, tau_E) overrides it (used when seeding just past a pitchfork,
    where natural-parameter first steps can slide onto the parent branch).
    Every accepted point carries its spectral summary and monitor data; the
    Branch records why tracing stopped.
    """
    if controls is None:
        controls = ContinuationControls()
    if newton_opts is None:
        newton_opts = NewtonOpts()
    if direction not in (+1, -1):
        raise ValueError("direction must be +1 or -1")
    V = potential_eval(m.potential, g)

    phi0, E0 = start
    phi0 = np.asarray(phi0, dtype=float)
    r0 = float(np.max(np.abs(residual(g, m, phi0, E0, V=V))))
    if r0 > 50.0 * effective_tol(g, m, phi0, E0, newton_opts, V=V):
        raise ValueError(f"start point is not converged: residual {r0:.3e}")

    branch = Branch(points=[], seed_info=seed_info or {}, termination="")
    p0 = make_branch_point(g, m, phi0, E0, V=V)
    branch.points.append(p0)

    reason = _termination_reason(g, p0, controls)
    if reason:
        branch.termination = reason
        return branch

    ds = min(controls.ds_init, controls.ds_max)
    made_progress = False
    tau = None

    if initial_tangent is not None:
        tphi, tE = initial_tangent
        n = extended_norm(g, tphi, tE)
        if n == 0.0:
            raise ValueError("initial_tangent must be nonzero")
        tau = (np.asarray(tphi, dtype=float) / n, float(tE) / n)
    else:
        # first step by natural parametrization when possible: a fixed-E
        # solve at E0 + direction*ds is immune to ill-conditioned tangent
        # solves at the start point and pins the orientation unambiguously
        from .solver import newton_fixed_E

        try:
            E1 = E0 + direction * ds
            amp0 = norm_l2(g, phi0)
            if E1 > 0:
                phi1 = newton_fixed_E(g, m, phi0, E1, opts=newton_opts, V=V)
                ok = extended_norm(g, phi1 - phi0, E1 - E0) <= 10.0 * ds
                # a small-amplitude start (pitchfork seed) must not collapse
                # onto the trivial branch: there the branch is vertical in
                # amplitude and the first step must come from the tangent
                if amp0 > 0 and norm_l2(g, phi1) < 0.5 * amp0:
                    ok = False
                if ok:
                    p1 = make_branch_point(g, m, phi1, E1, V=V)
                    branch.points.append(p1)
                    made_progress = True
                    tau = tangent(g, p0, p1)
                    reason = _termination_reason(g, p1, controls)
                    if reason:
                        branch.termination = reason
                        return branch
        except Exception:
            tau = None
        if tau is None:
            tau = _initial_tangent(g, m, p0, direction, V)

    for _ in range(controls.max_steps):
        prev = branch.points[-1]
        accepted = None
        while accepted is None:
            pred_phi = prev.phi + ds * tau[0]
            pred_E = prev.E + ds * tau[1]
            iters: list = []
            try:
                phi_new, E_new = bordered_corrector(
                    g, m, (pred_phi, pred_E), tau, ds, opts=newton_opts, V=V,
                    iters_out=iters,
                )
                step = extended_norm(g, phi_new - prev.phi, E_new - prev.E)
                if step < 0.01 * ds or E_new <= 0.0:
                    # corrector fell back onto the previous point or left the
                    # Fredholm domain: treat as a failed step
                    raise NoConvergence("corrector collapsed onto previous point")
                tau_new = tangent(g, prev, BranchPoint(phi=phi_new, E=E_new))
                ori = float(g.h * np.dot(tau[0], tau_new[0]) + tau[1] * tau_new[1])
                if ori <= 0.0:
                    raise NoConvergence("orientation reversal (suspected branch jump)")
                accepted = (phi_new, E_new, tau_new)
            except NoConvergence:
                try:
                    ds = adapt_step(ds, 0, False, controls)
                except StepUnderflow:
                    if not made_progress:
                        raise StalledBranch(
                            f"no progress from start (E = {E0}, direction {direction})"
                        ) from None
                    branch.termination = "step underflow"
                    return branch

        phi_new, E_new, tau_new = accepted
        point = make_branch_point(g, m, phi_new, E_new, V=V)
        branch.points.append(point)
        made_progress = True
        tau = tau_new
        ds = adapt_step(ds, iters[0] if iters else 3, True, controls)

        reason = _termination_reason(g, point, controls)
        if reason:
            branch.termination = reason
            return branch
        if len(branch.points) > 10:
            first = branch.points[0]
            dist = extended_norm(g, point.phi - first.phi, point.E - first.E)
            scale = 1.0 + extended_norm(g, first.phi, first.E)
            if dist <= controls.loop_tol * scale:
                tau_first = tangent(g, first, branch.points[1])
                ori = float(g.h * np.dot(tau[0], tau_first[0]) + tau[1] * tau_first[1])
                if ori > 0.0:
                    branch.termination = "loop closed"
                    return branch

    branch.termination = "max steps reached"
    return branch


def _termination_reason(g: Grid, point: BranchPoint, controls: ContinuationControls) -> str:
    if point.E >= controls.E_max:
        return "E_max reached"
    if point.E <= controls.E_min:
        return "E_min reached"
    if norm_h1(g, point.phi) >= controls.norm_max:
        return "norm_max reached"
    return ""


def refine_at_E(g: Grid, m: ModelSpec, branch: Branch, E_target: float,
                newton_opts: NewtonOpts | None = None) -> BranchPoint:
    """Converged point at an exact E value, seeded from the nearest branch point."""
    from .solver import newton_fixed_E

    idx = int(np.argmin(np.abs(branch.E_values - E_target)))
    phi = newton_fixed_E(g, m, branch.points[idx].phi, E_target, opts=newton_opts)
    return make_branch_point(g, m, phi, E_target)
