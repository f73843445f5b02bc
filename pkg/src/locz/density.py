"""Grid densities, test families, rearrangements and Lebesgue-norm measures.

Densities are piecewise constant on uniform cells. Every integral below is
an exact cell-measure-weighted sum, so identities such as norm preservation
under rearrangement hold to rounding error rather than quadrature error.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, ParameterError

__all__ = [
    "Interval", "GridDensity1D", "MaskedGrid2D", "DistributionFunction",
    "RadialProfile", "StepFamilyParams", "GaussFamilyParams",
    "make_step_family", "make_gauss_family", "random_mixture",
    "distribution_function", "decreasing_rearrangement",
    "spherical_rearrangement", "lp_norm", "participation_ratio",
    "less_concentrated", "mass_concentration_compare_vv",
    "write_density_csv", "read_density_csv", "format_float",
]

# ties in the concentration ordering are resolved with this slack
ORDER_TIE_TOL = 1e-12
ORDER_AGREEMENT_TOL = 1e-10


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Interval:
    x0: float
    x1: float

    def __post_init__(self):
        if not (np.isfinite(self.x0) and np.isfinite(self.x1)):
            raise ParameterError(f"interval endpoints must be finite, got ({self.x0}, {self.x1})")
        if not self.x1 > self.x0:
            raise ParameterError(f"interval needs x1 > x0, got ({self.x0}, {self.x1})")

    @property
    def length(self) -> float:
        return self.x1 - self.x0


@dataclass(frozen=True, eq=False)
class GridDensity1D:
    """Nonnegative cell values on a uniform grid over an interval.

    ``values[k]`` is the density on cell ``[x0 + k h, x0 + (k+1) h]``.
    """

    interval: Interval
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1 or v.size == 0:
            raise ParameterError("values must be a nonempty 1D array")
        if not np.all(np.isfinite(v)):
            raise ParameterError("values must be finite")
        if np.any(v < 0):
            raise ParameterError(f"values must be nonnegative (min {v.min():.3e})")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return self.interval.length / self.n

    @property
    def cell_measure(self) -> float:
        return self.h

    @property
    def measure(self) -> float:
        """Length of the domain."""
        return self.interval.length

    @property
    def edges(self) -> np.ndarray:
        return self.interval.x0 + self.h * np.arange(self.n + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.interval.x0 + self.h * (np.arange(self.n) + 0.5)

    @property
    def mass(self) -> float:
        return self.h * float(np.sum(self.values))

    def cell_values(self) -> np.ndarray:
        return self.values

    def normalized(self) -> "GridDensity1D":
        m = self.mass
        if m <= 0:
            raise ParameterError("cannot normalize a density with zero mass")
        return GridDensity1D(self.interval, self.values / m)


@dataclass(frozen=True, eq=False)
class MaskedGrid2D:
    """Cell values on a uniform ``nx x ny`` grid restricted to a boolean mask.

    Index ``[i, j]`` refers to the cell whose center is ``(x_i, y_j)``.
    Values outside the mask are forced to zero.
    """

    xint: Interval
    yint: Interval
    mask: np.ndarray
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        mask = _frozen(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise ParameterError("mask must be a 2D boolean array")
        if not mask.any():
            raise ParameterError("mask selects no cells")
        if self.values is None:
            vals = np.zeros(mask.shape)
        else:
            vals = np.array(self.values, dtype=float)
        if vals.shape != mask.shape:
            raise ParameterError(f"values shape {vals.shape} does not match mask {mask.shape}")
        if not np.all(np.isfinite(vals[mask])):
            raise ParameterError("values must be finite inside the mask")
        if np.any(vals[mask] < 0):
            raise ParameterError("values must be nonnegative")
        vals = np.where(mask, vals, 0.0)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def nx(self) -> int:
        return self.mask.shape[0]

    @property
    def ny(self) -> int:
        return self.mask.shape[1]

    @property
    def hx(self) -> float:
        return self.xint.length / self.nx

    @property
    def hy(self) -> float:
        return self.yint.length / self.ny

    @property
    def cell_measure(self) -> float:
        return self.hx * self.hy

    @property
    def measure(self) -> float:
        return self.cell_measure * int(self.mask.sum())

    @property
    def xc(self) -> np.ndarray:
        return self.xint.x0 + self.hx * (np.arange(self.nx) + 0.5)

    @property
    def yc(self) -> np.ndarray:
        return self.yint.x0 + self.hy * (np.arange(self.ny) + 0.5)

    def cell_centers(self) -> np.ndarray:
        """Centers of the masked cells, shape ``(count, 2)``, in C order."""
        X, Y = np.meshgrid(self.xc, self.yc, indexing="ij")
        return np.column_stack([X[self.mask], Y[self.mask]])

    def cell_values(self) -> np.ndarray:
        return self.values[self.mask]

    @property
    def mass(self) -> float:
        return self.cell_measure * float(np.sum(self.cell_values()))

    def with_values(self, values) -> "MaskedGrid2D":
        return MaskedGrid2D(self.xint, self.yint, self.mask, values)

    def normalized(self) -> "MaskedGrid2D":
        m = self.mass
        if m <= 0:
            raise ParameterError("cannot normalize a density with zero mass")
        return self.with_values(self.values / m)


def _dimension(u) -> int:
    if isinstance(u, GridDensity1D):
        return 1
    if isinstance(u, MaskedGrid2D):
        return 2
    raise TypeError(f"expected GridDensity1D or MaskedGrid2D, got {type(u).__name__}")


@dataclass(frozen=True, eq=False)
class DistributionFunction:
    thresholds: np.ndarray
    measures: np.ndarray


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radially symmetric step function ``value[k]`` on ``radii[k] <= r < radii[k+1]``."""

    radii: np.ndarray
    values: np.ndarray

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        k = np.searchsorted(self.radii, r, side="right") - 1
        inside = (k >= 0) & (k < self.values.size)
        out = np.zeros(r.shape)
        out[inside] = self.values[k[inside]]
        return out

    @property
    def radius(self) -> float:
        return float(self.radii[-1])

    def integral(self) -> float:
        return float(np.sum(self.values * np.pi * np.diff(self.radii ** 2)))


@dataclass(frozen=True)
class StepFamilyParams:
    """Two bumps of half-width ``b`` centered at ``a`` and ``a + d``."""

    a: float
    d: float
    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise ParameterError(f"half-width b must be positive, got {self.b}")
        if self.d < 0:
            raise ParameterError(f"separation d must be nonnegative, got {self.d}")
        eps = 1e-12
        if self.a - self.b < -eps or self.a + self.d + self.b > 1 + eps:
            raise ParameterError(
                f"bump supports leave (0, 1): a-b={self.a - self.b:.6g}, "
                f"a+d+b={self.a + self.d + self.b:.6g}")


@dataclass(frozen=True)
class GaussFamilyParams:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")


def _snap(edge_index: float) -> float:
    r = round(edge_index)
    return float(r) if abs(edge_index - r) < 1e-8 else edge_index


def _indicator_cell_averages(lo: float, hi: float, n: int) -> np.ndarray:
    """Exact averages of the indicator of ``[lo, hi]`` over the cells of (0, 1)."""
    # work in units of cells so jump positions on cell edges are exact
    L, H = _snap(lo * n), _snap(hi * n)
    k = np.arange(n)
    return np.clip(np.minimum(k + 1, H) - np.maximum(k, L), 0.0, 1.0)


def make_step_family(p: StepFamilyParams, n: int, allow_overlap: bool = False) -> GridDensity1D:
    """Normalized sum of two indicators of half-width ``b`` on (0, 1).

    Cells cut by a jump carry the exact cell average, so the result has mass
    one up to rounding. Overlapping bumps (``d < 2b``) must be requested
    explicitly with ``allow_overlap``.
    """
    if n < 16:
        raise ParameterError(f"need n >= 16 cells, got {n}")
    if p.d < 2 * p.b - 1e-12 and not allow_overlap:
        raise ParameterError(
            f"bumps overlap (d={p.d} < 2b={2 * p.b}); pass allow_overlap=True to accept")
    raw = (_indicator_cell_averages(p.a - p.b, p.a + p.b, n)
           + _indicator_cell_averages(p.a + p.d - p.b, p.a + p.d + p.b, n))
    return GridDensity1D(Interval(0.0, 1.0), raw).normalized()


def gauss_profile(x, sigma: float):
    """Unnormalized Gaussian profile vanishing at x = 0 and x = 1."""
    x = np.asarray(x, dtype=float)
    return np.exp(-(x - 0.5) ** 2 / sigma ** 2) - np.exp(-1.0 / (4.0 * sigma ** 2))


def make_gauss_family(p: GaussFamilyParams, n: int) -> GridDensity1D:
    """Sample the Gaussian profile at cell centers of (0, 1) and normalize."""
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    x = (np.arange(n) + 0.5) / n
    raw = gauss_profile(x, p.sigma)
    # exp(-1/(4 sigma^2)) <= exp(-(x-1/2)^2/sigma^2) so negatives are rounding only
    raw = np.maximum(raw, 0.0)
    if not np.any(raw > 0):
        raise ParameterError(f"sigma={p.sigma} too small for n={n}: every sample underflows")
    return GridDensity1D(Interval(0.0, 1.0), raw).normalized()


def random_mixture(rng: np.random.Generator, n: int, interval: Interval = Interval(0.0, 1.0),
                   max_components: int = 4, floor: float = 0.0) -> GridDensity1D:
    """Random mixture of step and Gaussian bumps, normalized to unit mass.

    Bump positions and widths are drawn relative to ``interval``. A positive
    ``floor`` adds a constant background.
    """
    L = interval.length
    x = interval.x0 + L * (np.arange(n) + 0.5) / n
    raw = np.full(n, float(floor))
    for _ in range(int(rng.integers(1, max_components + 1))):
        c = interval.x0 + L * rng.uniform(0.05, 0.95)
        w = L * rng.uniform(0.02, 0.2)
        amp = rng.uniform(0.2, 1.0)
        if rng.random() < 0.5:
            raw += amp * (np.abs(x - c) <= w)
        else:
            raw += amp * np.exp(-((x - c) / w) ** 2)
    if not raw.any():
        raw[n // 2] = 1.0
    return GridDensity1D(interval, raw).normalized()


def distribution_function(u, thresholds) -> DistributionFunction:
    """Measure of the superlevel sets ``{|u| > k}`` for each threshold ``k``."""
    _dimension(u)
    k = np.asarray(thresholds, dtype=float)
    if k.ndim != 1 or k.size == 0:
        raise ParameterError("thresholds must be a nonempty 1D array")
    if np.any(k < 0) or np.any(np.diff(k) <= 0):
        raise ParameterError("thresholds must be nonnegative and strictly increasing")
    a = np.sort(np.abs(u.cell_values()))
    counts = a.size - np.searchsorted(a, k, side="right")
    return DistributionFunction(_frozen(k), _frozen(u.cell_measure * counts))


def decreasing_rearrangement(u) -> GridDensity1D:
    """Nonincreasing rearrangement on ``(0, |Omega|)``, one cell per domain cell."""
    _dimension(u)
    vals = np.abs(u.cell_values())
    if not np.any(vals > 0):
        raise ParameterError("density has zero mass")
    return GridDensity1D(Interval(0.0, u.measure), np.sort(vals)[::-1])


def spherical_rearrangement(u: MaskedGrid2D) -> RadialProfile:
    """Radially decreasing rearrangement on the disc of area ``|Omega|``.

    ``u#(r) = u*(pi r^2)``; the cells of ``u*`` become annuli of equal area.
    """
    if not isinstance(u, MaskedGrid2D):
        raise ParameterError("spherical rearrangement is implemented for 2D grids only")
    us = decreasing_rearrangement(u)
    radii = np.sqrt(us.edges / np.pi)
    radii[0] = 0.0
    return RadialProfile(_frozen(radii), us.values)


def lp_norm(u, p: float) -> float:
    _dimension(u)
    if not p >= 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    a = np.abs(u.cell_values())
    if np.isinf(p):
        return float(a.max())
    top = a.max()
    if top == 0:
        return 0.0
    # scale by the max to avoid overflow for large p
    return float(top * (u.cell_measure * np.sum((a / top) ** p)) ** (1.0 / p))


def participation_ratio(u, p: float, q: float) -> float:
    """``|Omega|^(1/q - 1/p) ||u||_p / ||u||_q`` for ``1 <= p < q <= inf``."""
    if not (1 <= p < q):
        raise ParameterError(f"need 1 <= p < q <= inf, got p={p}, q={q}")
    nq = lp_norm(u, q)
    if nq == 0:
        raise ParameterError("participation ratio undefined for the zero density")
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    return float(u.measure ** (inv_q - 1.0 / p) * lp_norm(u, p) / nq)


def _step_positive_part_integral(f: GridDensity1D, g: GridDensity1D) -> float:
    """Exact ``int (f - g)_+`` for step functions on the same interval."""
    edges = np.union1d(f.edges, g.edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    fv = f.values[np.clip(np.searchsorted(f.edges, mid, side="right") - 1, 0, f.n - 1)]
    gv = g.values[np.clip(np.searchsorted(g.edges, mid, side="right") - 1, 0, g.n - 1)]
    return float(np.sum(np.maximum(fv - gv, 0.0) * np.diff(edges)))


def _same_domain_measure(u, v):
    if not np.isclose(u.measure, v.measure, rtol=1e-12, atol=0):
        raise ParameterError(f"domains differ in measure: {u.measure} vs {v.measure}")


def less_concentrated(u, v) -> bool:
    """True when ``u`` is less concentrated than ``v``.

    Evaluates both the positive-part inequality between the sup-normalized
    rearrangements and the equivalent comparison of ``alpha_{1,inf}``, and
    raises :class:`ConsistencyError` if they disagree.
    """
    _same_domain_measure(u, v)
    us, vs = decreasing_rearrangement(u), decreasing_rearrangement(v)
    us = GridDensity1D(us.interval, us.values / us.values[0])
    vs = GridDensity1D(vs.interval, vs.values / vs.values[0])
    gap_def = _step_positive_part_integral(vs, us) - _step_positive_part_integral(us, vs)
    gap_alpha = u.measure * (participation_ratio(v, 1, np.inf) - participation_ratio(u, 1, np.inf))
    if abs(gap_def - gap_alpha) > ORDER_AGREEMENT_TOL:
        raise ConsistencyError(
            f"ordering tests disagree: definition gap {gap_def:.3e}, alpha gap {gap_alpha:.3e}")
    return bool(gap_def <= ORDER_TIE_TOL * u.measure)


def _unit_ball_measure(dim: int) -> float:
    return 2.0 if dim == 1 else np.pi


def mass_concentration_compare_vv(u, v, radii) -> np.ndarray:
    """Per-radius truth of ``int_{B_R} u# <= int_{B_R} v#``.

    In one dimension the ball ``B_R`` is the interval of length ``2R``.
    """
    dim = _dimension(u)
    if _dimension(v) != dim:
        raise ParameterError("u and v live in different dimensions")
    _same_domain_measure(u, v)
    R = np.asarray(radii, dtype=float)
    omega = _unit_ball_measure(dim)
    r_max = (u.measure / omega) ** (1.0 / dim)
    if np.any(R <= 0) or np.any(R >= r_max):
        raise ParameterError(f"radii must lie in (0, {r_max:.6g})")
    s = omega * R ** dim

    def partial_mass(w):
        ws = decreasing_rearrangement(w)
        cum = np.concatenate([[0.0], np.cumsum(ws.values) * ws.h])
        return np.interp(s, ws.edges, cum)

    pu, pv = partial_mass(u), partial_mass(v)
    return pu <= pv + ORDER_TIE_TOL * np.maximum(1.0, np.abs(pv))


def format_float(x: float) -> str:
    """17 significant digits in scientific notation."""
    return f"{float(x):.16e}"


def write_density_csv(u, path) -> int:
    """Write ``x,value`` (1D) or ``x,y,mask,value`` (2D); return the row count."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if _dimension(u) == 1:
            w.writerow(["x", "value"])
            for x, val in zip(u.centers, u.values):
                w.writerow([format_float(x), format_float(val)])
            return u.n
        w.writerow(["x", "y", "mask", "value"])
        for i, x in enumerate(u.xc):
            for j, y in enumerate(u.yc):
                w.writerow([format_float(x), format_float(y), int(u.mask[i, j]),
                            format_float(u.values[i, j])])
        return u.nx * u.ny


def read_density_csv(path):
    """Inverse of :func:`write_density_csv`; the grid is inferred from the centers."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float)
    if header == ["x", "value"]:
        x = data[:, 0]
        h = (x[-1] - x[0]) / (x.size - 1) if x.size > 1 else 1.0
        return GridDensity1D(Interval(x[0] - h / 2, x[-1] + h / 2), data[:, 1])
    if header == ["x", "y", "mask", "value"]:
        xs, ys = np.unique(data[:, 0]), np.unique(data[:, 1])
        nx, ny = xs.size, ys.size
        hx = (xs[-1] - xs[0]) / (nx - 1) if nx > 1 else 1.0
        hy = (ys[-1] - ys[0]) / (ny - 1) if ny > 1 else 1.0
        mask = data[:, 2].reshape(nx, ny).astype(bool)
        vals = data[:, 3].reshape(nx, ny)
        return MaskedGrid2D(Interval(xs[0] - hx / 2, xs[-1] + hx / 2),
                            Interval(ys[0] - hy / 2, ys[-1] + hy / 2), mask, vals)
    raise ParameterError(f"unrecognized density CSV header {header}")
