"""Dirichlet Sturm-Liouville eigenfunctions and their localization scores.

``-(p u')' = lambda u`` on (0, 1) with ``u(0) = u(1) = 0`` is discretized on
the nodes ``x_i = i h`` by the conservative three-point stencil with ``p``
sampled at the interval midpoints ``x_{i+1/2}``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .density import GridDensity1D, Interval, format_float, participation_ratio
from .errors import ConvergenceError, ParameterError
from .transport1d import extended_domain_beta, w2_quantile

__all__ = [
    "SLProblem", "TridiagonalOperator", "EigenPair", "localized_metric",
    "discretize_sl", "eigensolve", "eigenfunction_density", "score_localization",
    "write_sl_csv",
]


def localized_metric(x):
    """``tanh(40 x - 10) + 1.1``, bounded below by 0.1."""
    return np.tanh(40.0 * np.asarray(x, dtype=float) - 10.0) + 1.1


@dataclass(frozen=True, eq=False)
class SLProblem:
    """``p_half[i]`` is ``p`` at ``(i + 1/2) h`` for ``i = 0..n-1``."""

    p_half: np.ndarray
    count: int

    def __post_init__(self):
        p = np.array(self.p_half, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ParameterError("p_half must be a 1D array with at least two samples")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ParameterError("p must be finite and positive at every sample")
        if self.count < 1 or p.size < 8 * self.count:
            raise ParameterError(f"need 1 <= count and n >= 8 count, got n={p.size}, count={self.count}")
        p.setflags(write=False)
        object.__setattr__(self, "p_half", p)

    @property
    def n(self) -> int:
        return self.p_half.size

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @classmethod
    def from_function(cls, p, n: int, count: int) -> "SLProblem":
        if n < 2:
            raise ParameterError(f"n must be at least 2, got {n}")
        return cls(p((np.arange(n) + 0.5) / n), count)


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Symmetric tridiagonal matrix on the ``n - 1`` interior nodes."""

    diagonal: np.ndarray
    offdiagonal: np.ndarray
    h: float

    @property
    def size(self) -> int:
        return self.diagonal.size

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diagonal) + np.diag(self.offdiagonal, 1)
                + np.diag(self.offdiagonal, -1))


def discretize_sl(problem: SLProblem) -> TridiagonalOperator:
    p, h = problem.p_half, problem.h
    diag = (p[:-1] + p[1:]) / h**2
    off = -p[1:-1] / h**2
    return TridiagonalOperator(diag, off, h)


@dataclass(frozen=True, eq=False)
class EigenPair:
    """``phi`` holds the interior nodal values with ``h sum(phi^2) = 1``."""

    index: int
    eigenvalue: float
    phi: np.ndarray
    h: float


def eigensolve(op: TridiagonalOperator, count: int) -> list[EigenPair]:
    """The ``count`` smallest eigenpairs in ascending order."""
    n = op.size + 1
    if count < 1 or count > n // 8:
        raise ParameterError(f"count must lie in [1, n/8 = {n // 8}], got {count}")
    try:
        lam, vec = eigh_tridiagonal(op.diagonal, op.offdiagonal,
                                    select="i", select_range=(0, count - 1))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"tridiagonal eigensolver failed: {exc}") from exc
    if np.any(np.diff(lam) <= 0):
        k = int(np.flatnonzero(np.diff(lam) <= 0)[0]) + 2
        raise ConvergenceError(f"eigenvalue {k} is not strictly above its predecessor")
    pairs = []
    for k in range(count):
        v = vec[:, k] / np.sqrt(op.h * np.sum(vec[:, k] ** 2))
        first = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))[0]
        if v[first] < 0:
            v = -v
        v.setflags(write=False)
        pairs.append(EigenPair(k + 1, float(lam[k]), v, op.h))
    return pairs


def eigenfunction_density(pair: EigenPair) -> GridDensity1D:
    """L1-normalized ``|phi|`` as a cell density on (0, 1).

    The nodal modulus, padded with the boundary zeros, is averaged onto the
    ``n`` cells between consecutive nodes.
    """
    a = np.concatenate([[0.0], np.abs(pair.phi), [0.0]])
    return GridDensity1D(Interval(0.0, 1.0), 0.5 * (a[:-1] + a[1:])).normalized()


def score_localization(pairs, mode: str = "standard", margin: float = 1.0) -> np.ndarray:
    """``(alpha_{2,4}^{-1}, beta)`` per eigenpair.

    ``mode="extended"`` measures ``beta`` on ``(-margin, 1 + margin)``.
    """
    if not pairs:
        raise ParameterError("no eigenpairs to score")
    if mode not in ("standard", "extended"):
        raise ParameterError(f"mode must be 'standard' or 'extended', got {mode!r}")
    rows = []
    for pr in pairs:
        u = eigenfunction_density(pr)
        beta = w2_quantile(u) if mode == "standard" else extended_domain_beta(u, margin)
        rows.append((1.0 / participation_ratio(u, 2, 4), beta))
    return np.array(rows)


def write_sl_csv(path, pairs, standard, extended) -> int:
    """Rows ``index,eigenvalue,alpha24_inv,beta_std,beta_ext``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "alpha24_inv", "beta_std", "beta_ext"])
        for pr, s, e in zip(pairs, standard, extended):
            w.writerow([str(pr.index), format_float(pr.eigenvalue), format_float(s[0]),
                        format_float(s[1]), format_float(e[1])])
    return len(pairs)
