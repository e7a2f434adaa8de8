"""Uniform Dirichlet discretization of the truncated line.

The domain [-L, L] is discretized with N interior nodes x_i = -L + i*h,
h = 2L/(N+1); fields carry only interior values, the boundary values are
implicitly zero. The rectangle rule with weight h is the quadrature, which
keeps the second-order difference operator exactly symmetric.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Interior nodes of the truncated line with Dirichlet boundaries."""

    L: float
    N: int
    h: float
    x: np.ndarray = field(repr=False)

    def mirror(self, f: np.ndarray) -> np.ndarray:
        """Reflection x -> -x, exact on the symmetric node set."""
        return f[::-1]


def build_grid(L: float, N: int) -> Grid:
    """Build the uniform grid on [-L, L] with N interior nodes.

    Nodes are constructed as negatives of their mirror images so the
    symmetry x_i = -x_{N+1-i} holds exactly in floating point.
    """
    if not L > 0:
        raise ValueError(f"half-width must be positive, got {L}")
    if N < 3:
        raise ValueError(f"need at least 3 interior nodes, got {N}")
    h = 2.0 * L / (N + 1)
    half = np.array([-L + i * h for i in range(1, N // 2 + 1)])
    if N % 2 == 1:
        x = np.concatenate([half, [0.0], -half[::-1]])
    else:
        x = np.concatenate([half, -half[::-1]])
    return Grid(L=float(L), N=int(N), h=h, x=x)


def _check_field(g: Grid, f: np.ndarray, name: str = "field") -> np.ndarray:
    f = np.asarray(f)
    if f.shape != (g.N,):
        raise ValueError(f"{name} has shape {f.shape}, expected ({g.N},)")
    return f


def laplacian_apply(g: Grid, f: np.ndarray) -> np.ndarray:
    """Apply -Laplacian (second-order central differences, zero boundaries).

    Positive semidefinite and symmetric in the grid inner product.
    """
    f = _check_field(g, f)
    out = 2.0 * f
    out[1:] -= f[:-1]
    out[:-1] -= f[1:]
    return out / (g.h * g.h)


def inner_product(g: Grid, f: np.ndarray, w: np.ndarray):
    """Discrete L2 pairing h * sum(conj(f) * w)."""
    f = _check_field(g, f, "f")
    w = _check_field(g, w, "w")
    return g.h * np.vdot(f, w)


def norm_l2(g: Grid, f: np.ndarray) -> float:
    return float(np.sqrt(g.h) * np.linalg.norm(f))


def gradient_sq(g: Grid, f: np.ndarray) -> float:
    """||grad f||^2 by forward differences on the zero-padded field.

    Chosen so that the discrete integration-by-parts identity
    gradient_sq(f) == inner_product(laplacian_apply(f), f) is exact.
    """
    f = _check_field(g, f)
    d = np.diff(f, prepend=0.0, append=0.0)
    return float(np.real(np.vdot(d, d)) / g.h)


def norm_h1(g: Grid, f: np.ndarray) -> float:
    return float(np.sqrt(g.h * np.real(np.vdot(f, f)) + gradient_sq(g, f)))
