"""Homogeneous H^{-1} norms through the Neumann-Poisson problem.

For a zero-mean source ``t`` on ``Omega`` the potential solves

    -Laplace(w) = |Omega| t  in Omega,    dw/dn = 0  on the boundary,

and ``||t||`` in H^{-1} weighted by the uniform probability on ``Omega`` is
``|Omega|^{-1/2} ||grad w||``. In one dimension ``w`` is integrated in
closed form. In two dimensions a five-point finite-volume scheme on the
masked grid is solved by Jacobi-preconditioned conjugate gradients.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage, sparse

from .density import GridDensity1D, MaskedGrid2D, format_float
from .errors import CompatibilityError, ConsistencyError, ConvergenceError, ParameterError

__all__ = [
    "ZeroMeanSource", "NeumannSolution", "PeyreBounds", "check_mask_topology",
    "solve_neumann_poisson", "h_minus1_norm", "HMinus1Norm", "peyre_coefficient",
    "peyre_bounds", "write_potential_csv",
]

COMPATIBILITY_TOL = 1e-10
CG_RTOL = 1e-10


def check_mask_topology(mask) -> None:
    """Reject masks that are empty, disconnected, or have holes.

    Cells are connected through shared faces. A hole is a component of the
    complement (with diagonal contact) that does not reach the outer frame.
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2 or not m.any():
        raise ParameterError("mask must be a nonempty 2D boolean array")
    _, ncomp = ndimage.label(m)
    if ncomp != 1:
        raise ParameterError(f"mask is disconnected ({ncomp} components)")
    outside = np.pad(~m, 1, constant_values=True)
    _, nholes = ndimage.label(outside, structure=np.ones((3, 3), dtype=int))
    if nholes != 1:
        raise ParameterError(f"mask is not simply connected ({nholes - 1} holes)")


@dataclass(frozen=True, eq=False)
class ZeroMeanSource:
    """Mixed-sign cell values ``t`` on the layout of ``grid``.

    ``grid`` supplies geometry only. For a 2D grid ``values`` has the full
    ``nx x ny`` shape and entries outside the mask are ignored.
    """

    grid: GridDensity1D | MaskedGrid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if isinstance(self.grid, MaskedGrid2D):
            if v.shape != self.grid.mask.shape:
                raise ParameterError("source shape does not match the mask")
            v = np.where(self.grid.mask, v, 0.0)
            inside = v[self.grid.mask]
        elif isinstance(self.grid, GridDensity1D):
            if v.shape != (self.grid.n,):
                raise ParameterError("source length does not match the grid")
            inside = v
        else:
            raise ParameterError(f"unsupported grid type {type(self.grid).__name__}")
        if not np.all(np.isfinite(inside)):
            raise ParameterError("source values must be finite")
        integral = self.grid.cell_measure * float(np.sum(inside))
        scale = self.grid.cell_measure * float(np.sum(np.abs(inside)))
        if abs(integral) > COMPATIBILITY_TOL * max(1.0, scale):
            raise CompatibilityError(
                f"source integral is {integral:.3e}; the Neumann problem needs zero mean")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_density(cls, u) -> "ZeroMeanSource":
        """``t = u - 1/|Omega|`` for a unit-mass density ``u``."""
        if abs(u.mass - 1.0) > COMPATIBILITY_TOL:
            raise ParameterError(f"density must have unit mass, got {u.mass:.15g}")
        t = u.values - 1.0 / u.measure
        if isinstance(u, MaskedGrid2D):
            t = np.where(u.mask, t, 0.0)
        return cls(u, t)


@dataclass(frozen=True, eq=False)
class NeumannSolution:
    """Potential ``w`` at cell centers plus its face gradients.

    ``gradient`` holds one array in 1D (values at the cell edges, including
    the two boundary edges where it vanishes) and ``(gx, gy)`` in 2D, with
    one entry per interior face. ``energy`` is ``||grad w||^2``.
    """

    w: np.ndarray
    gradient: tuple
    energy: float
    residual: float
    iterations: int


def _solve_1d(src: ZeroMeanSource) -> NeumannSolution:
    g = src.grid
    h, L = g.h, g.measure
    T = np.concatenate([[0.0], np.cumsum(src.values)]) * h
    T[-1] = 0.0  # compatibility, removes the rounding residue
    # -w' = L T with T piecewise linear, so w is piecewise quadratic
    dw = -L * T
    W = np.concatenate([[0.0], np.cumsum(0.5 * h * (dw[:-1] + dw[1:]))])
    Wm = W[:-1] + 0.5 * h * 0.5 * (dw[:-1] + 0.5 * (dw[:-1] + dw[1:]))
    mean = float(np.sum(h / 6.0 * (W[:-1] + 4.0 * Wm + W[1:]))) / L
    d0, d1 = dw[:-1], dw[1:]
    energy = float(h * np.sum(d0 * d0 + d0 * d1 + d1 * d1) / 3.0)
    return NeumannSolution(Wm - mean, (dw,), energy, 0.0, 0)


def _fv_operator(grid: MaskedGrid2D):
    """Sparse FV Laplacian on masked cells and the face index pairs."""
    m = grid.mask
    idx = -np.ones(m.shape, dtype=np.int64)
    idx[m] = np.arange(int(m.sum()))
    fx = m[:-1, :] & m[1:, :]
    fy = m[:, :-1] & m[:, 1:]
    xa, xb = idx[:-1, :][fx], idx[1:, :][fx]
    ya, yb = idx[:, :-1][fy], idx[:, 1:][fy]
    cx, cy = grid.hy / grid.hx, grid.hx / grid.hy
    a = np.concatenate([xa, ya])
    b = np.concatenate([xb, yb])
    c = np.concatenate([np.full(xa.size, cx), np.full(ya.size, cy)])
    n = int(m.sum())
    off = sparse.coo_matrix((-c, (a, b)), shape=(n, n))
    A = off + off.T
    diag = -np.asarray(A.sum(axis=1)).ravel()
    A = (A + sparse.diags(diag)).tocsr()
    return A, diag, (xa, xb), (ya, yb)


def _pcg_zero_mean(A, diag, b, rtol: float, max_iter: int):
    """Conjugate gradients on the zero-mean subspace with a Jacobi preconditioner."""
    n = b.size
    if np.any(diag <= 0):
        raise ParameterError("a masked cell has no neighbors")
    minv = 1.0 / diag
    x = np.zeros(n)
    r = b - b.mean()
    bnorm = np.linalg.norm(r)
    if bnorm == 0.0:
        return x, 0.0, 0
    z = minv * r
    z -= z.mean()
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        if res <= rtol:
            x -= x.mean()
            return x, res, it
        z = minv * r
        z -= z.mean()
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        p -= p.mean()
        rz = rz_new
    raise ConvergenceError(f"CG stopped after {max_iter} iterations at relative residual {res:.3e}")


def _solve_2d(src: ZeroMeanSource, rtol: float, max_iter: int | None) -> NeumannSolution:
    g = src.grid
    check_mask_topology(g.mask)
    A, diag, (xa, xb), (ya, yb) = _fv_operator(g)
    b = g.measure * src.values[g.mask] * g.cell_measure
    n = b.size
    x, res, it = _pcg_zero_mean(A, diag, b, rtol, max_iter or max(1000, 20 * n))
    w = np.zeros(g.mask.shape)
    w[g.mask] = x
    gx = (x[xb] - x[xa]) / g.hx
    gy = (x[yb] - x[ya]) / g.hy
    energy = float(x @ (A @ x))
    return NeumannSolution(w, (gx, gy), energy, float(res), it)


def solve_neumann_poisson(t: ZeroMeanSource, rtol: float = CG_RTOL,
                          max_iter: int | None = None) -> NeumannSolution:
    if isinstance(t.grid, GridDensity1D):
        return _solve_1d(t)
    return _solve_2d(t, rtol, max_iter)


@dataclass(frozen=True)
class HMinus1Norm:
    weighted: float
    unweighted: float


def h_minus1_norm(u, rtol: float = CG_RTOL) -> HMinus1Norm:
    """Distance of ``u`` to the uniform density in the homogeneous H^{-1} norm.

    ``weighted`` is measured against the uniform probability on ``Omega``;
    ``unweighted`` against Lebesgue measure, smaller by ``|Omega|^{1/2}``.
    """
    sol = solve_neumann_poisson(ZeroMeanSource.from_density(u), rtol=rtol)
    L = u.measure
    weighted = float(np.sqrt(max(sol.energy, 0.0) / L))
    return HMinus1Norm(weighted, weighted / np.sqrt(L))


@dataclass(frozen=True)
class PeyreBounds:
    lower: float
    upper: float
    sobolev: float
    coefficient: float
    z: float
    w2: float | None = None


def peyre_coefficient(z: float) -> float:
    """``ln z / (2 (sqrt z - 1))``; tends to 1 as ``z -> 1``."""
    if z < 1.0:
        raise ParameterError(f"z = ||u||_inf |Omega| must be >= 1, got {z}")
    e = np.sqrt(z) - 1.0
    return 1.0 if e == 0.0 else float(np.log1p(e) / e)


def peyre_bounds(u, w2: float | None = None, rtol: float = CG_RTOL) -> PeyreBounds:
    """Lower and upper bounds on ``W2`` to the uniform density from the H^{-1} norm.

    With ``z = ||u||_inf |Omega|`` and ``S`` the weighted norm,
    ``ln z / (2 (sqrt z - 1)) S <= W2 <= 2 S``. A supplied ``w2`` is checked
    against the bounds and a violation raises :class:`ConsistencyError`.
    """
    z = float(np.max(u.cell_values())) * u.measure
    # a unit-mass density always has z >= 1; clip the rounding
    z = max(z, 1.0) if z > 1.0 - 1e-12 else z
    coef = peyre_coefficient(z)
    s = h_minus1_norm(u, rtol=rtol).weighted
    out = PeyreBounds(coef * s, 2.0 * s, s, coef, z, w2)
    if w2 is not None and not (out.lower <= w2 <= out.upper):
        raise ConsistencyError(
            f"W2 = {w2:.17g} outside the bounds [{out.lower:.17g}, {out.upper:.17g}]")
    return out


def write_potential_csv(grid: MaskedGrid2D, sol: NeumannSolution, path) -> int:
    """Debug dump ``x,y,w`` of a 2D potential over the masked cells."""
    pts = grid.cell_centers()
    w = sol.w[grid.mask]
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "y", "w"])
        for (x, y), v in zip(pts, w):
            out.writerow([format_float(x), format_float(y), format_float(v)])
    return len(w)
