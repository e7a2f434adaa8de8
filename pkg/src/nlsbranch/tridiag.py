"""Symmetric tridiagonal matrices: storage, matvec, banded solves."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .grid import Grid


@dataclass(frozen=True)
class SymTridiag:
    """Symmetric tridiagonal operator: diagonal d (len N), off-diagonal e (len N-1)."""

    d: np.ndarray = field(repr=False)
    e: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.d * v
        out[:-1] = out[:-1] + self.e * v[1:]
        out[1:] = out[1:] + self.e * v[:-1]
        return out

    def shifted(self, s: float) -> "SymTridiag":
        return SymTridiag(self.d + s, self.e)

    def inf_norm(self) -> float:
        row = np.abs(self.d).astype(float)
        row[:-1] += np.abs(self.e)
        row[1:] += np.abs(self.e)
        return float(row.max()) if row.size else 0.0

    def to_banded(self) -> np.ndarray:
        """(3, N) banded storage for scipy.linalg.solve_banded with (1, 1)."""
        n = self.n
        ab = np.zeros((3, n), dtype=np.result_type(self.d, self.e))
        ab[0, 1:] = self.e
        ab[1] = self.d
        ab[2, :-1] = self.e
        return ab

    def to_dense(self) -> np.ndarray:
        return np.diag(self.d) + np.diag(self.e, 1) + np.diag(self.e, -1)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return solve_banded((1, 1), self.to_banded(), b)


def free_laplacian(g: Grid) -> SymTridiag:
    """-Laplacian with Dirichlet boundaries as a symmetric tridiagonal matrix."""
    h2 = g.h * g.h
    return SymTridiag(np.full(g.N, 2.0 / h2), np.full(g.N - 1, -1.0 / h2))


def free_laplacian_eigenvalue(g: Grid, k: int) -> float:
    """Closed-form k-th eigenvalue (k = 1..N) of the Dirichlet difference Laplacian."""
    return 4.0 / (g.h * g.h) * np.sin(k * np.pi / (2.0 * (g.N + 1))) ** 2
