"""Small dense linear algebra with explicit pivoting.

These matrices are r x r with r at most a handful, so plain Python loops over
numpy rows are fine and keep the pivot bookkeeping visible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularMatrix(ArithmeticError):
    pass


@dataclass
class Elimination:
    rank: int
    det: float
    pivots: list[float]   # absolute pivots in elimination order
    scale: float          # max |entry| of the input

    @property
    def pivot_ratio(self) -> float:
        """max pivot / min pivot, infinite when rank deficient."""
        if not self.pivots or min(self.pivots) == 0.0:
            return float("inf")
        return max(self.pivots) / min(self.pivots)


def eliminate(a, rtol: float = 1e-9) -> Elimination:
    """Gaussian elimination with full pivoting.

    A pivot smaller than ``rtol * max|a_ij|`` ends the elimination; the number
    of pivots accepted so far is the numerical rank.
    """
    m = np.array(a, dtype=float)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("square matrix expected")
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    det = 1.0
    pivots: list[float] = []
    for k in range(n):
        sub = np.abs(m[k:, k:])
        i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
        piv = sub[i, j]
        if scale == 0.0 or piv <= rtol * scale:
            return Elimination(k, 0.0, pivots, scale)
        i += k
        j += k
        if i != k:
            m[[k, i]] = m[[i, k]]
            det = -det
        if j != k:
            m[:, [k, j]] = m[:, [j, k]]
            det = -det
        det *= m[k, k]
        pivots.append(abs(m[k, k]))
        m[k + 1 :] -= np.outer(m[k + 1 :, k] / m[k, k], m[k])
    return Elimination(n, det, pivots, scale)


def inverse(a) -> np.ndarray:
    """Gauss-Jordan inverse with partial pivoting."""
    m = np.array(a, dtype=float)
    n = m.shape[0]
    aug = np.hstack([m, np.eye(n)])
    for k in range(n):
        p = k + int(np.argmax(np.abs(aug[k:, k])))
        if aug[p, k] == 0.0:
            raise SingularMatrix("matrix is singular")
        if p != k:
            aug[[k, p]] = aug[[p, k]]
        aug[k] /= aug[k, k]
        others = np.arange(n) != k
        aug[others] -= np.outer(aug[others, k], aug[k])
    return aug[:, n:]


def solve(a, b) -> np.ndarray:
    return inverse(a) @ np.asarray(b, dtype=float)
