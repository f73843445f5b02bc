"""One-dimensional Wasserstein-2 distance to the uniform density.

Two independent integrators are provided for densities on (0, 1):

* :func:`w2_quantile` integrates ``(U^{-1}(y) - y)^2`` over ``y`` using the
  pseudo-inverse of the CDF,
* :func:`h_minus1_1d` integrates ``(U(x) - x)^2`` over ``x``.

Both are exact for piecewise-constant densities, so they agree to rounding.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .density import GridDensity1D, Interval, format_float
from .errors import ParameterError
from .ot import CostKernel, atomize, solve_exact, uniform_measure_like, DEFAULT_BUDGET

__all__ = [
    "Cdf1D", "LocalizationScore", "rescale_to_unit", "cdf", "quantile",
    "w2_quantile", "h_minus1_1d", "localization_score", "lp_w2_1d",
    "periodized_w2_1d", "extended_domain_beta", "write_sweep_csv",
]

MASS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Cdf1D:
    """Piecewise-linear CDF given by its values at the cell edges."""

    grid: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class LocalizationScore:
    w2: float
    sobolev: float
    w2_method: str = "quantile"
    sobolev_method: str = "cdf-integral"


def _require_unit(u: GridDensity1D):
    if abs(u.interval.x0) > 1e-14 or abs(u.interval.x1 - 1.0) > 1e-14:
        raise ParameterError(
            f"density must live on (0, 1), got ({u.interval.x0}, {u.interval.x1}); "
            "use rescale_to_unit first")


def rescale_to_unit(v: GridDensity1D) -> GridDensity1D:
    """Map a normalized density on ``(x0, x1)`` to one on (0, 1).

    ``u(x) = |Omega| v(|Omega| x + x0)``.
    """
    if abs(v.mass - 1.0) > MASS_TOL:
        raise ParameterError(f"density must be normalized, mass is {v.mass:.15g}")
    return GridDensity1D(Interval(0.0, 1.0), v.values * v.interval.length)


def cdf(u: GridDensity1D) -> Cdf1D:
    _require_unit(u)
    mass = u.mass
    if abs(mass - 1.0) > MASS_TOL:
        raise ParameterError(f"cdf needs a unit-mass density, measured mass {mass:.15g}")
    U = np.concatenate([[0.0], np.cumsum(u.values)]) * u.h
    U /= U[-1]
    return Cdf1D(u.edges, U)


def quantile(U: Cdf1D, r):
    """Pseudo-inverse ``inf{t : U(t) > r}`` of a piecewise-linear CDF.

    On a plateau ``U = r`` this returns the right end of the plateau, the
    first point past which ``U`` exceeds ``r``.
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r >= 1) or np.any(r < 0):
        raise ParameterError("quantile level must lie in [0, 1)")
    k = np.searchsorted(U.values, r, side="right")
    x0, x1 = U.grid[k - 1], U.grid[k]
    u0, u1 = U.values[k - 1], U.values[k]
    t = x0 + (r - u0) / (u1 - u0) * (x1 - x0)
    return float(t[0]) if scalar else t


def w2_quantile(u: GridDensity1D) -> float:
    """``W2(mu_u, lambda)`` on (0, 1) from the quantile function.

    ``U^{-1}`` is linear between consecutive distinct CDF values, so Simpson's
    rule on each such ``y``-segment is exact.
    """
    U = cdf(u)
    ys = np.unique(U.values)
    ya, yb = ys[:-1], ys[1:]
    ym = 0.5 * (ya + yb)
    # segments one ulp wide have no representable interior point
    keep = (ym > ya) & (ym < yb)
    ya, yb, ym = ya[keep], yb[keep], ym[keep]
    qa = quantile(U, ya)
    qm = quantile(U, ym)
    qb = 2.0 * qm - qa  # left limit at yb along the linear piece
    da, dm, db = qa - ya, qm - ym, qb - yb
    return float(np.sqrt(max(np.sum((yb - ya) / 6.0 * (da * da + 4 * dm * dm + db * db)), 0.0)))


def h_minus1_1d(u: GridDensity1D) -> float:
    """``||mu_u - lambda||`` in the homogeneous H^{-1} norm on (0, 1)."""
    U = cdf(u)
    D = U.values - U.grid
    d0, d1 = D[:-1], D[1:]
    return float(np.sqrt(max(u.h * np.sum(d0 * d0 + d0 * d1 + d1 * d1) / 3.0, 0.0)))


def localization_score(u: GridDensity1D) -> LocalizationScore:
    return LocalizationScore(w2=w2_quantile(u), sobolev=h_minus1_1d(u))


def _lp_w2(u, v, kernel, budget):
    mu = atomize(u)
    nu = uniform_measure_like(u) if v is None else atomize(v)
    return float(np.sqrt(max(solve_exact(mu, nu, kernel, budget=budget).cost, 0.0)))


def lp_w2_1d(u: GridDensity1D, v: GridDensity1D | None = None,
             budget: int = DEFAULT_BUDGET) -> float:
    """Squared-cost LP distance between the atomized densities.

    ``v`` defaults to the uniform density on the grid of ``u``.
    """
    return _lp_w2(u, v, CostKernel.squared_euclidean(), budget)


def periodized_w2_1d(u: GridDensity1D, v: GridDensity1D | None = None,
                     budget: int = DEFAULT_BUDGET) -> float:
    """LP transport distance under ``min{(x-y)^2, (1-|x-y|)^2}`` on (0, 1)."""
    _require_unit(u)
    if v is not None:
        _require_unit(v)
    return _lp_w2(u, v, CostKernel.periodized_1d(1.0), budget)


def _extend(u: GridDensity1D, margin: float) -> GridDensity1D:
    if margin < 0:
        raise ParameterError(f"margin must be nonnegative, got {margin}")
    pad = margin / u.h
    k = int(round(pad))
    if abs(pad - k) > 1e-9 * max(1.0, pad):
        raise ParameterError(f"margin {margin} is not a whole number of cells (h={u.h})")
    vals = np.concatenate([np.zeros(k), u.values, np.zeros(k)])
    return GridDensity1D(Interval(u.interval.x0 - k * u.h, u.interval.x1 + k * u.h), vals)


def extended_domain_beta(u: GridDensity1D, margin: float, method: str = "quantile") -> float:
    """``W2(mu_u, |Omega'|^{-1} lambda)`` on ``Omega' = (-margin, 1 + margin)``.

    ``u`` is extended by zero; the distance is computed on the rescaled unit
    problem and multiplied by ``|Omega'|``. ``method`` selects the quantile
    (``"quantile"``) or CDF (``"sobolev"``) integrator.
    """
    _require_unit(u)
    ext = _extend(u, margin)
    unit = rescale_to_unit(ext)
    integrate = {"quantile": w2_quantile, "sobolev": h_minus1_1d}.get(method)
    if integrate is None:
        raise ParameterError(f"unknown method {method!r}")
    return ext.interval.length * integrate(unit)


def write_sweep_csv(path, params, beta_w2, beta_sobolev, param_name: str = "param") -> int:
    """Write ``param,beta_w2,beta_sobolev`` rows; return the row count."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([param_name, "beta_w2", "beta_sobolev"])
        for row in zip(params, beta_w2, beta_sobolev):
            w.writerow([format_float(x) for x in row])
    return len(params)
