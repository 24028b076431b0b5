"""Fractional and integral job-to-machine assignments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POLYTOPE_TOL = 1e-7


@dataclass(frozen=True)
class FractionalAssignment:
    """``x[i, j]`` is the share of job ``j`` placed on machine ``i``."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("x must be an m-by-n matrix")
        object.__setattr__(self, "x", x)

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def polytope_violation(self) -> float:
        x = self.x
        return float(max(np.abs(x.sum(axis=0) - 1.0).max(), (-x).max(), (x - 1.0).max()))

    def check(self, tol: float = POLYTOPE_TOL) -> None:
        v = self.polytope_violation()
        if v > tol:
            raise ValueError(f"x is not in the assignment polytope (violation {v:.3g})")


@dataclass(frozen=True)
class IntegralAssignment:
    machine_of: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "machine_of", tuple(int(i) for i in self.machine_of))

    @property
    def n(self) -> int:
        return len(self.machine_of)

    def matrix(self, m: int) -> np.ndarray:
        x = np.zeros((m, self.n))
        x[list(self.machine_of), list(range(self.n))] = 1.0
        return x

    def jobs_on(self, i: int) -> list[int]:
        return [j for j, k in enumerate(self.machine_of) if k == i]

    @classmethod
    def from_matrix(cls, x: np.ndarray, tol: float = 1e-9) -> "IntegralAssignment":
        x = np.asarray(x)
        if np.any((x > tol) & (x < 1 - tol)):
            raise ValueError("matrix is not integral")
        return cls(tuple(int(i) for i in np.argmax(x, axis=0)))
