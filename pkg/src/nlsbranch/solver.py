"""Newton solvers for the stationary equation and the bordered arclength system.

The fixed-E Jacobian on the real slice is exactly L_plus, so Newton steps are
tridiagonal solves and the spectral module sees the same operator the solver
used. The bordered corrector appends the arclength constraint

    <tau_phi, phi - phi_pred>_h + tau_E (E - E_pred) = 0

and solves the tridiagonal-plus-border system by block elimination with
iterative refinement (sparse-LU fallback when L_plus is nearly singular).
"""

from dataclasses import dataclass

import numpy as np

from .errors import NearBifurcation, NoConvergence, NoLinearBoundState, NumericalFailure, OutsideFredholmDomain
from .grid import Grid, inner_product
from .model import ModelSpec, linearization, potential_eval, residual
from .spectral import lowest_state
from .tridiag import SymTridiag, free_laplacian


@dataclass(frozen=True)
class NewtonOpts:
    tol_residual: float = 1e-10
    max_iter: int = 50
    damping: float = 1.0

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must be in (0, 1]")


def _tol_floor(g: Grid, m: ModelSpec, phi: np.ndarray, E: float, V: np.ndarray) -> float:
    # residual entries cannot be evaluated below rounding of the stiffest term
    amp = float(np.max(np.abs(phi))) if phi.size else 0.0
    op_scale = 2.0 / (g.h * g.h) + float(np.max(np.abs(V))) + abs(E) + abs(m.gamma) * (m.p + 1.0) * amp**m.p
    return 64.0 * np.finfo(float).eps * op_scale * max(amp, 1e-30)


def effective_tol(g: Grid, m: ModelSpec, phi: np.ndarray, E: float, opts: NewtonOpts, V: np.ndarray | None = None) -> float:
    if V is None:
        V = potential_eval(m.potential, g)
    return max(opts.tol_residual, _tol_floor(g, m, phi, E, V))


def newton_fixed_E(
    g: Grid,
    m: ModelSpec,
    phi0: np.ndarray,
    E: float,
    opts: NewtonOpts | None = None,
    V: np.ndarray | None = None,
) -> np.ndarray:
    """Solve F(phi, E) = 0 at fixed E > 0 by damped Newton with L_plus steps."""
    if opts is None:
        opts = NewtonOpts()
    if not E > 0:
        raise OutsideFredholmDomain(f"fixed-E Newton requires E > 0, got E = {E}")
    phi = np.array(phi0, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("initial profile contains non-finite entries")
    if V is None:
        V = potential_eval(m.potential, g)
    r = residual(g, m, phi, E, V=V)
    rnorm = float(np.max(np.abs(r)))
    for it in range(opts.max_iter):
        tol = max(opts.tol_residual, _tol_floor(g, m, phi, E, V))
        if rnorm <= tol:
            return phi
        l_plus, _ = linearization(g, m, phi, E, V=V)
        try:
            delta = l_plus.solve(-r)
        except Exception as exc:
            raise NearBifurcation(f"singular L_plus in fixed-E Newton at E = {E}") from exc
        if not np.all(np.isfinite(delta)):
            raise NearBifurcation(f"singular L_plus in fixed-E Newton at E = {E}")
        alpha = opts.damping
        for _ in range(30):
            trial = phi + alpha * delta
            r_try = residual(g, m, trial, E, V=V)
            rn_try = float(np.max(np.abs(r_try)))
            if rn_try < rnorm or rn_try <= tol:
                phi, r, rnorm = trial, r_try, rn_try
                break
            alpha *= 0.5
        else:
            if rnorm <= 32.0 * tol:
                return phi  # rounding plateau: no step can improve this
            raise NoConvergence(
                f"fixed-E Newton stalled at E = {E}: residual {rnorm:.3e}",
                iterate=phi, residual_norm=rnorm, iterations=it,
            )
    if rnorm <= max(opts.tol_residual, _tol_floor(g, m, phi, E, V)):
        return phi
    raise NoConvergence(
        f"fixed-E Newton did not converge at E = {E}: residual {rnorm:.3e}",
        iterate=phi, residual_norm=rnorm, iterations=opts.max_iter,
    )


def _solve_bordered(l_plus: SymTridiag, b: np.ndarray, c: np.ndarray, d: float,
                    r_top: np.ndarray, r_bot: float):
    """Solve [[L_plus, b], [c^T, d]] [dphi, dE] = [r_top, r_bot].

    Block elimination with iterative refinement; falls back to a sparse LU
    of the arrow matrix when L_plus is too close to singular.
    """
    n = l_plus.n

    def block_solve(rt, rb):
        z1 = l_plus.solve(rt)
        z2 = l_plus.solve(b)
        den = d - np.dot(c, z2)
        if den == 0.0 or not np.isfinite(den):
            raise NumericalFailure("singular bordered system")
        dE = (rb - np.dot(c, z1)) / den
        dphi = z1 - dE * z2
        return dphi, dE

    def residual_of(dphi, dE):
        rt = r_top - (l_plus.matvec(dphi) + b * dE)
        rb = r_bot - (np.dot(c, dphi) + d * dE)
        return rt, rb

    try:
        dphi, dE = block_solve(r_top, r_bot)
        for _ in range(2):
            rt, rb = residual_of(dphi, dE)
            nr = max(float(np.max(np.abs(rt))), abs(rb))
            scale = max(float(np.max(np.abs(r_top))), abs(r_bot), 1e-300)
            if nr <= 1e-10 * scale:
                break
            ddphi, ddE = block_solve(rt, rb)
            dphi = dphi + ddphi
            dE = dE + ddE
        rt, rb = residual_of(dphi, dE)
        nr = max(float(np.max(np.abs(rt))), abs(rb))
        scale = max(float(np.max(np.abs(r_top))), abs(r_bot), 1e-300)
        if np.all(np.isfinite(dphi)) and np.isfinite(dE) and nr <= 1e-8 * scale:
            return dphi, dE
    except Exception:
        pass

    # arrow-matrix sparse LU (stable near singular L_plus)
    from scipy.sparse import csc_matrix
    from scipy.sparse.linalg import splu

    rows = np.concatenate([
        np.arange(n), np.arange(n - 1), np.arange(1, n),
        np.arange(n), np.full(n, n), [n],
    ])
    cols = np.concatenate([
        np.arange(n), np.arange(1, n), np.arange(n - 1),
        np.full(n, n), np.arange(n), [n],
    ])
    vals = np.concatenate([l_plus.d, l_plus.e, l_plus.e, b, c, [d]])
    A = csc_matrix((vals, (rows, cols)), shape=(n + 1, n + 1))
    try:
        lu = splu(A)
        sol = lu.solve(np.concatenate([r_top, [r_bot]]))
    except Exception as exc:
        raise NumericalFailure("bordered system is singular") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericalFailure("bordered system is singular")
    return sol[:n], float(sol[n])


def bordered_corrector(
    g: Grid,
    m: ModelSpec,
    predicted,
    tangent,
    ds: float,
    opts: NewtonOpts | None = None,
    V: np.ndarray | None = None,
    iters_out: list | None = None,
):
    """Correct a predicted point onto {F = 0} along the plane normal to the tangent.

    predicted = (phi_pred, E_pred); tangent = (tau_phi, tau_E), unit in the
    extended inner product. Returns the converged (phi, E). When iters_out is
    a list, the Newton iteration count is appended (step-control hook).
    """
    if opts is None:
        opts = NewtonOpts()
    phi_pred, E_pred = predicted
    tau_phi, tau_E = tangent
    phi = np.array(phi_pred, dtype=float)
    E = float(E_pred)
    if V is None:
        V = potential_eval(m.potential, g)
    for it in range(opts.max_iter):
        r = residual(g, m, phi, E, V=V)
        cons = float(np.real(inner_product(g, tau_phi, phi - phi_pred))) + tau_E * (E - E_pred)
        tol = max(opts.tol_residual, _tol_floor(g, m, phi, E, V))
        rnorm = max(float(np.max(np.abs(r))), abs(cons))
        if rnorm <= tol:
            if iters_out is not None:
                iters_out.append(it)
            return phi, E
        l_plus, _ = linearization(g, m, phi, E, V=V)
        dphi, dE = _solve_bordered(l_plus, phi, g.h * tau_phi, tau_E, -r, -cons)
        alpha = opts.damping
        improved = False
        for _ in range(30):
            phi_t = phi + alpha * dphi
            E_t = E + alpha * dE
            r_t = residual(g, m, phi_t, E_t, V=V)
            cons_t = float(np.real(inner_product(g, tau_phi, phi_t - phi_pred))) + tau_E * (E_t - E_pred)
            rn = max(float(np.max(np.abs(r_t))), abs(cons_t))
            if rn < rnorm or rn <= tol:
                phi, E = phi_t, E_t
                improved = True
                break
            alpha *= 0.5
        if not improved:
            if rnorm <= 32.0 * tol:
                if iters_out is not None:
                    iters_out.append(it)
                return phi, E  # rounding plateau
            raise NoConvergence(
                f"bordered corrector stalled near E = {E} (ds = {ds})",
                iterate=(phi, E), residual_norm=rnorm, iterations=it,
            )
    raise NoConvergence(
        f"bordered corrector did not converge near E = {E} (ds = {ds})",
        iterate=(phi, E), residual_norm=rnorm, iterations=opts.max_iter,
    )


def seed_primary_branch(g: Grid, m: ModelSpec, E0: float | None = None, s: float = 1e-2):
    """Small-amplitude seed just off the trivial-branch bifurcation at E0.

    phi0 = s * v0 with v0 the unit ground state of -Laplacian + V, and
    E_start = E0 - sign(gamma) * c * s^p with the leading normal-form balance
    c = |gamma| (v0, |v0|^p v0)/(v0, v0): the branch bends toward E > E0 for
    attractive gamma < 0 and toward E < E0 for gamma > 0.
    """
    V = potential_eval(m.potential, g)
    linop = free_laplacian(g)
    T = SymTridiag(linop.d + V, linop.e)
    lam, v0 = lowest_state(g, T)
    if lam >= 0:
        raise NoLinearBoundState(
            f"-Laplacian + V has no negative eigenvalue (lambda_min = {lam:.3e})"
        )
    if E0 is not None and abs(lam + E0) > 1e-6 * max(1.0, abs(lam)):
        raise ValueError(f"supplied E0 = {E0} is not the lowest eigenvalue (-lambda = {-lam})")
    E0 = -lam
    num = float(np.real(inner_product(g, v0, np.abs(v0) ** m.p * v0)))
    den = float(np.real(inner_product(g, v0, v0)))
    c = abs(m.gamma) * num / den
    E_start = E0 - np.sign(m.gamma) * c * s**m.p
    return s * v0, float(E_start)
