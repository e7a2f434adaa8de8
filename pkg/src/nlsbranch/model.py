"""The NLS model: potentials, stationary residual, functionals, linearization.

Stationary states solve

    F(phi, E) = (-Laplacian + V + E) phi + gamma |phi|^p phi = 0

for real profiles phi on the grid (complex phases are restored only in the
evolution module). The linearization at a real profile block-diagonalizes
into two symmetric tridiagonal operators

    L_plus  = -Laplacian + V + E + gamma (p+1) |phi|^p
    L_minus = -Laplacian + V + E + gamma |phi|^p

and L_minus * phi equals F(phi, E) as an algebraic identity.
"""

from dataclasses import dataclass

import numpy as np

from .grid import Grid, gradient_sq
from .tridiag import SymTridiag, free_laplacian

POTENTIAL_KINDS = ("zero", "single_gaussian_well", "double_gaussian_well")


@dataclass(frozen=True)
class PotentialSpec:
    """Even, non-confining potential family: V -> 0 as |x| -> infinity."""

    kind: str = "zero"
    depth: float = 0.0
    separation: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")
        if not self.width > 0:
            raise ValueError("width must be > 0")

    def __call__(self, x):
        a, l, s = self.depth, self.separation, self.width
        if self.kind == "zero":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.kind == "single_gaussian_well":
            return -a * np.exp(-(x / s) ** 2)
        return -a * (np.exp(-((x - l) / s) ** 2) + np.exp(-((x + l) / s) ** 2))

    def deriv(self, x):
        """Analytic V'(x)."""
        a, l, s = self.depth, self.separation, self.width
        if self.kind == "zero":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.kind == "single_gaussian_well":
            return 2.0 * a * x / s**2 * np.exp(-(x / s) ** 2)
        return (2.0 * a / s**2) * (
            (x - l) * np.exp(-((x - l) / s) ** 2) + (x + l) * np.exp(-((x + l) / s) ** 2)
        )

    def deriv2(self, x):
        """Analytic V''(x)."""
        a, l, s = self.depth, self.separation, self.width
        if self.kind == "zero":
            return np.zeros_like(np.asarray(x, dtype=float))
        if self.kind == "single_gaussian_well":
            u = (x / s) ** 2
            return 2.0 * a / s**2 * (1.0 - 2.0 * u) * np.exp(-u)
        um = ((x - l) / s) ** 2
        up = ((x + l) / s) ** 2
        return (2.0 * a / s**2) * (
            (1.0 - 2.0 * um) * np.exp(-um) + (1.0 - 2.0 * up) * np.exp(-up)
        )


@dataclass(frozen=True)
class ModelSpec:
    """Potential family plus nonlinearity: coupling gamma, power p > 0."""

    potential: PotentialSpec
    gamma: float = -1.0
    p: float = 2.0

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("nonlinearity power p must be > 0")


@dataclass(frozen=True)
class Functionals:
    """Energy split into kinetic + potential + nonlinear, plus the charge."""

    energy: float
    kinetic: float
    potential: float
    nonlinear: float
    charge: float


def potential_eval(spec: PotentialSpec, g: Grid) -> np.ndarray:
    """Sample V at the grid nodes (exactly even for the even families)."""
    return spec(g.x)


def _abs_pow(phi: np.ndarray, p: float) -> np.ndarray:
    # |phi|^p with the convention 0^p = 0; abs avoids complex roots for odd p
    return np.abs(phi) ** p


def residual(g: Grid, m: ModelSpec, phi: np.ndarray, E: float, V: np.ndarray | None = None) -> np.ndarray:
    """F(phi, E) = (-Laplacian + V + E) phi + gamma |phi|^p phi, nodewise."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (g.N,):
        raise ValueError(f"profile has shape {phi.shape}, expected ({g.N},)")
    if V is None:
        V = potential_eval(m.potential, g)
    lap = free_laplacian(g)
    return lap.matvec(phi) + (V + E) * phi + m.gamma * _abs_pow(phi, m.p) * phi


def charge(g: Grid, phi: np.ndarray) -> float:
    """Q = (1/2) * h * sum |phi|^2."""
    phi = np.asarray(phi)
    return float(0.5 * g.h * np.real(np.vdot(phi, phi)))


def energy(g: Grid, m: ModelSpec, phi: np.ndarray, V: np.ndarray | None = None) -> Functionals:
    """Discrete energy with forward-difference kinetic term.

    kinetic = (1/2)||grad phi||^2 (exactly ( -Lap phi, phi )/2 by summation
    by parts), potential = (1/2) int V |phi|^2, nonlinear =
    gamma/(p+2) int |phi|^{p+2}.
    """
    phi = np.asarray(phi)
    if V is None:
        V = potential_eval(m.potential, g)
    kin = 0.5 * gradient_sq(g, phi)
    absphi2 = np.real(phi * np.conj(phi))
    pot = float(0.5 * g.h * np.sum(V * absphi2))
    nl = float(m.gamma / (m.p + 2.0) * g.h * np.sum(absphi2 ** ((m.p + 2.0) / 2.0)))
    return Functionals(
        energy=kin + pot + nl,
        kinetic=kin,
        potential=pot,
        nonlinear=nl,
        charge=charge(g, phi),
    )


def _centered_diff(g: Grid, phi: np.ndarray) -> np.ndarray:
    padded = np.concatenate([[0.0], phi, [0.0]])
    return (padded[2:] - padded[:-2]) / (2.0 * g.h)


def pohozaev_residual(g: Grid, m: ModelSpec, phi: np.ndarray, E: float, V: np.ndarray | None = None) -> float:
    """Pohozaev check: the L2 pairing of F(phi, E) with x * phi'.

    Vanishes (to rounding times the residual norm) on solutions of the
    discrete stationary equation; O(h^2) when a sampled continuum solution
    is substituted. See pohozaev_identity_terms for the integrated-by-parts
    form of the same identity.
    """
    r = residual(g, m, phi, E, V=V)
    return float(g.h * np.sum(r * g.x * _centered_diff(g, phi)))


def pohozaev_identity_terms(g: Grid, m: ModelSpec, phi: np.ndarray, E: float, V: np.ndarray | None = None):
    """Integrated-by-parts Pohozaev identity, term by term.

    Returns (kinetic_half, mass_term, virial_term, nonlinear_term, total) with

        total = (1/2)||phi'||^2 - (1/2) int (V+E) phi^2
                - (1/2) int x V'(x) phi^2 - gamma/(p+2) int |phi|^{p+2}

    which vanishes on exact continuum solutions and decays at second order
    under h-refinement at a fixed smooth profile.
    """
    phi = np.asarray(phi, dtype=float)
    if V is None:
        V = potential_eval(m.potential, g)
    kin = 0.5 * gradient_sq(g, phi)
    phi2 = phi * phi
    mass = float(0.5 * g.h * np.sum((V + E) * phi2))
    virial = float(0.5 * g.h * np.sum(g.x * m.potential.deriv(g.x) * phi2))
    nl = float(m.gamma / (m.p + 2.0) * g.h * np.sum(_abs_pow(phi, m.p + 2.0)))
    return kin, mass, virial, nl, kin - mass - virial - nl


def linearization(g: Grid, m: ModelSpec, phi: np.ndarray, E: float, V: np.ndarray | None = None):
    """(L_plus, L_minus) at a real profile, as symmetric tridiagonal operators."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (g.N,):
        raise ValueError(f"profile has shape {phi.shape}, expected ({g.N},)")
    if V is None:
        V = potential_eval(m.potential, g)
    lap = free_laplacian(g)
    w = m.gamma * _abs_pow(phi, m.p)
    base = lap.d + V + E
    l_plus = SymTridiag(base + (m.p + 1.0) * w, lap.e)
    l_minus = SymTridiag(base + w, lap.e)
    return l_plus, l_minus


def critical_points(spec: PotentialSpec, L: float, samples: int = 4001):
    """Critical points of V on (-L, L) as (location, kind) with kind from V''.

    kind is 'minimum', 'maximum', or 'degenerate' (|V''| below scale tolerance).
    The zero potential has none.
    """
    from scipy.optimize import brentq

    if spec.kind == "zero" or spec.depth == 0.0:
        return []
    xs = np.linspace(-L, L, samples)
    dv = spec.deriv(xs)
    roots = []
    for i in range(len(xs) - 1):
        a, b = dv[i], dv[i + 1]
        # strict sign changes; the Gaussian tails underflow V' to exactly
        # zero far from the wells and those plateaus are not critical points
        if a * b < 0.0:
            roots.append(brentq(spec.deriv, xs[i], xs[i + 1], xtol=1e-14))
    for i in range(1, len(xs) - 1):
        # a sample landing exactly on a root (V' is exactly 0 at x = 0 for
        # the even families) shows opposite-sign neighbors instead
        if dv[i] == 0.0 and dv[i - 1] * dv[i + 1] < 0.0:
            roots.append(xs[i])
    pts = []
    for root in sorted(roots):
        curv = float(spec.deriv2(root))
        scale = spec.depth / spec.width**2
        if abs(curv) < 1e-8 * scale:
            kind = "degenerate"
        else:
            kind = "minimum" if curv > 0 else "maximum"
        pts.append((float(root), kind))
    # collapse near-duplicates from sampling
    out = []
    for root, kind in pts:
        if not out or abs(root - out[-1][0]) > 1e-9 * max(1.0, L):
            out.append((root, kind))
    return out
