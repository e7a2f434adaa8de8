"""Eigenvalue counting and extremal eigenpairs of symmetric tridiagonals.

Inertia counts come from the Sturm sequence of the shifted LDL^T recurrence,
so they are exact (no iterative eigensolver involved). The k smallest
eigenvalues are isolated by bisection on the count and refined to relative
width 1e-12; eigenvectors come from inverse iteration. This is the primitive
the bifurcation logic leans on: Morse indices change only when a counted
eigenvalue actually crosses a threshold.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure
from .grid import Grid
from .tridiag import SymTridiag

log = logging.getLogger(__name__)

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _sturm_count_kernel(d, e, tau):
    """Number of eigenvalues strictly below tau; -1 on zero-pivot breakdown."""
    count = 0
    t = d[0] - tau
    if t < 0.0:
        count += 1
    for i in range(1, d.shape[0]):
        if t == 0.0:
            return -1
        t = d[i] - tau - e[i - 1] * e[i - 1] / t
        if t < 0.0:
            count += 1
    return count


def eig_count_below(T: SymTridiag, tau: float, scale: float | None = None) -> int:
    """Exact count of eigenvalues of T strictly below tau.

    A zero pivot in the Sturm recurrence is resolved by nudging tau by an
    ulp-scale amount (reported at debug level); the count is unchanged for
    any eigenvalue further than the nudge from tau. scale caches ||T||_inf
    across repeated counts of the same operator.
    """
    d = np.ascontiguousarray(T.d, dtype=np.float64)
    e = np.ascontiguousarray(T.e, dtype=np.float64)
    if scale is None:
        scale = max(T.inf_norm(), 1.0)
    nudge = scale * 1e-14
    t = float(tau)
    for attempt in range(60):
        c = _sturm_count_kernel(d, e, t)
        if c >= 0:
            if attempt:
                log.debug("sturm count: nudged tau by %g after %d breakdowns", t - tau, attempt)
            return int(c)
        t += nudge
        nudge *= 2.0
    raise NumericalFailure("sturm count: persistent zero pivot")


def _gershgorin(T: SymTridiag):
    r = np.zeros_like(T.d)
    r[:-1] += np.abs(T.e)
    r[1:] += np.abs(T.e)
    return float(np.min(T.d - r)), float(np.max(T.d + r))


def _bisect_kth(T: SymTridiag, k: int, lo: float, hi: float, scale: float) -> float:
    """Isolate the k-th smallest eigenvalue (1-based) to relative width 1e-12."""
    a, b = lo, hi
    while True:
        width = b - a
        if width <= 1e-12 * max(abs(a), abs(b)) or width <= 1e-15 * scale:
            return 0.5 * (a + b)
        mid = 0.5 * (a + b)
        if eig_count_below(T, mid, scale=scale) >= k:
            b = mid
        else:
            a = mid


def _inverse_iteration(T: SymTridiag, lam: float, scale: float, seed: int, prev=None):
    """Eigenvector for an isolated eigenvalue near lam by inverse iteration."""
    n = T.n
    rng = np.random.default_rng(12345 + seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    shift = lam
    for attempt in range(5):
        ok = True
        for _ in range(8):
            shifted = T.shifted(-shift)
            try:
                w = shifted.solve(v)
            except Exception:
                ok = False
                break
            nw = np.linalg.norm(w)
            if not np.isfinite(nw) or nw == 0.0:
                ok = False
                break
            v = w / nw
            if prev is not None:
                for u in prev:
                    v = v - np.dot(u, v) * u
                nv = np.linalg.norm(v)
                if nv < 1e-8:
                    ok = False
                    break
                v /= nv
            res = np.linalg.norm(T.matvec(v) - lam * v)
            if res <= 1e-10 * scale:
                if v[np.argmax(np.abs(v))] < 0:
                    v = -v
                return v
        if ok:
            res = np.linalg.norm(T.matvec(v) - lam * v)
            if res <= 1e-8 * scale:
                if v[np.argmax(np.abs(v))] < 0:
                    v = -v
                return v
        # stagnation: perturb the shift and retry
        shift = lam + scale * 1e-12 * (attempt + 1)
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
    raise NumericalFailure(f"inverse iteration stagnated at eigenvalue {lam}")


def smallest_eigenpairs(T: SymTridiag, k: int, weight: float = 1.0, values=None):
    """k algebraically smallest eigenpairs, values nondecreasing.

    Vectors are normalized so that weight * sum(v^2) = 1; pass weight = g.h
    for unit norm in the grid inner product. Sign convention: the entry of
    largest magnitude is positive. Precomputed eigenvalues may be supplied
    via values to skip the bisection stage.
    """
    n = T.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    scale = max(T.inf_norm(), 1.0)
    if values is None:
        values = smallest_eigenvalues(T, k)
    pairs = []
    vecs = []
    for j in range(1, k + 1):
        lam = values[j - 1]
        gap_ok = all(abs(lam - p[0]) > 1e-8 * scale for p in pairs)
        v = _inverse_iteration(T, lam, scale, seed=j, prev=None if gap_ok else vecs)
        v = v / np.sqrt(weight * np.dot(v, v))
        pairs.append((lam, v))
        vecs.append(v / np.linalg.norm(v))
    return pairs


def smallest_eigenvalues(T: SymTridiag, k: int):
    """Values-only variant of smallest_eigenpairs (no inverse iteration)."""
    n = T.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    scale = max(T.inf_norm(), 1.0)
    lo, hi = _gershgorin(T)
    lo -= 1e-12 * scale
    hi += 1e-12 * scale
    out = []
    for j in range(1, k + 1):
        lam = _bisect_kth(T, j, lo, hi, scale)
        out.append(lam)
        lo = lam
    return out


def mirror_parity(g: Grid, v: np.ndarray, parity_tol: float = 1e-6) -> str:
    """'even' / 'odd' / 'none' by comparing v with its mirror image."""
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return "none"
    rev = v[::-1]
    if np.linalg.norm(v - rev) <= parity_tol * nv:
        return "even"
    if np.linalg.norm(v + rev) <= parity_tol * nv:
        return "odd"
    return "none"


@dataclass(frozen=True)
class SpectralSummary:
    """Morse data of the linearized pair (L_plus, L_minus) at one profile.

    Morse counts tally eigenvalues below -kernel_tol, so numerically-zero
    kernels (the gauge mode of L_minus, lattice-pinned translation modes)
    are not miscounted as negative.
    """

    morse_plus: int
    morse_minus: int
    lambda_min_plus: float
    lambda2_plus: float
    lambda_min_minus: float
    kernel_tol: float
    kernel_vector_plus: np.ndarray | None = field(default=None, repr=False)
    kernel_parity: str = "none"

    @property
    def n_total(self) -> int:
        return self.morse_plus + self.morse_minus


def summarize(
    g: Grid,
    l_plus: SymTridiag,
    l_minus: SymTridiag,
    kernel_tol: float | None = None,
    parity_tol: float = 1e-6,
) -> SpectralSummary:
    """Morse indices, extremal eigenvalues, and kernel parity of L_plus/L_minus."""
    scale = max(l_plus.inf_norm(), l_minus.inf_norm(), 1.0)
    if kernel_tol is None:
        kernel_tol = 1e-8 * scale
    morse_p = eig_count_below(l_plus, -kernel_tol)
    morse_m = eig_count_below(l_minus, -kernel_tol)
    lam_p1, lam_p2 = smallest_eigenvalues(l_plus, 2)
    (lam_m1,) = smallest_eigenvalues(l_minus, 1)
    kvec = None
    parity = "none"
    if abs(lam_p1) <= kernel_tol or abs(lam_p2) <= kernel_tol:
        idx = 1 if abs(lam_p1) <= kernel_tol else 2
        pairs = smallest_eigenpairs(l_plus, idx, weight=g.h, values=[lam_p1, lam_p2][:idx])
        kvec = pairs[idx - 1][1]
        parity = mirror_parity(g, kvec, parity_tol)
    return SpectralSummary(
        morse_plus=morse_p,
        morse_minus=morse_m,
        lambda_min_plus=lam_p1,
        lambda2_plus=lam_p2,
        lambda_min_minus=lam_m1,
        kernel_tol=kernel_tol,
        kernel_vector_plus=kvec,
        kernel_parity=parity,
    )


def lowest_state(g: Grid, T: SymTridiag):
    """(lambda_min, eigenvector) with the vector unit-normalized in the grid inner product."""
    ((lam, v),) = smallest_eigenpairs(T, 1, weight=g.h)
    return lam, v
