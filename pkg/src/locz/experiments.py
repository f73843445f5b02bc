"""Experiment drivers behind the command line.

Each driver takes a dict of validated parameters and an output directory,
writes its CSV files there, and returns ``[(filename, rows), ...]``.
Sweep points are independent; ``jobs > 1`` evaluates them in worker
processes while keeping the output order fixed.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .density import (
    GaussFamilyParams, Interval, MaskedGrid2D, StepFamilyParams, format_float,
    make_gauss_family, make_step_family, participation_ratio, random_mixture,
)
from .errors import ConsistencyError, ParameterError
from .hm1 import check_mask_topology, peyre_bounds
from .neumann_poincare import (
    SUPERFORMULA_CURVES, np_spectrum, score_np_localization, write_curve_csv,
    write_np_scores_csv,
)
from .ot import (
    CostKernel, atomize, distance_to_segments, mask_boundary_segments, separable_cost_value,
    solve_exact, two_bump_2d, uniform_measure_like,
)
from .sturm import SLProblem, discretize_sl, eigensolve, localized_metric, score_localization, write_sl_csv
from .transport1d import extended_domain_beta, h_minus1_1d, lp_w2_1d, periodized_w2_1d, w2_quantile

__all__ = ["ExperimentConfig", "EXPERIMENTS", "run_experiment", "d_sweep", "ellipse_mask"]


@dataclass
class ExperimentConfig:
    tag: str
    params: dict = field(default_factory=dict)
    out: Path = Path("locz_out")
    jobs: int = 1


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


def _write_rows(path: Path, header, rows) -> int:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_float(v) for v in row])
    return len(rows)


def d_sweep(p: dict) -> np.ndarray:
    return np.linspace(p["d_min"], p["d_max"], p["d_count"])


def _step(a, d, b, n):
    return make_step_family(StepFamilyParams(a, d, b), n, allow_overlap=True)


# module-level workers so that they pickle for process pools

def _family_point(args):
    a, d, b, n = args
    u = _step(a, d, b, n)
    return participation_ratio(u, 2, 4), w2_quantile(u), h_minus1_1d(u)


def _gauss_point(args):
    sigma, n = args
    u = make_gauss_family(GaussFamilyParams(sigma), n)
    return participation_ratio(u, 2, 4), w2_quantile(u), h_minus1_1d(u)


def _periodized_point(args):
    a, d, b, n = args
    u = _step(a, d, b, n)
    return lp_w2_1d(u), periodized_w2_1d(u)


def _extended_point(args):
    a, d, b, n, margin = args
    u = _step(a, d, b, n)
    return extended_domain_beta(u, margin), extended_domain_beta(u, margin, method="sobolev")


def _peyre_point(args):
    seed, k, n = args
    rng = np.random.default_rng([seed, k])
    u = random_mixture(rng, n, floor=0.05).normalized()
    w2 = lp_w2_1d(u)
    b = peyre_bounds(u, w2=w2)
    return b.lower, w2, b.upper, b.sobolev


def _np_curve(args):
    k, N, count, grading = args
    curve, pairs = np_spectrum(SUPERFORMULA_CURVES[k], N, count, grading=grading)
    return curve, score_np_localization(pairs)


def _ot2d_point(args):
    grid, d, width, segments = args
    mu = atomize(two_bump_2d(grid, d, width))
    nu = uniform_measure_like(grid)
    plan = solve_exact(mu, nu, CostKernel.distance_to_boundary(segments),
                       budget=len(mu) * len(nu))
    dist = lambda X: distance_to_segments(X, segments)  # noqa: E731
    return plan.cost, separable_cost_value(mu, nu, dist, dist)


def run_families(p, out: Path, jobs: int):
    ds = d_sweep(p)
    rows = _map(_family_point, [(p["a"], d, p["b"], p["n"]) for d in ds], jobs)
    files = [("families_d.csv", _write_rows(
        out / "families_d.csv", ["param", "alpha24", "beta_w2", "beta_sobolev"],
        [(d, *r) for d, r in zip(ds, rows)]))]
    a_max = 1.0 - p["a_sweep_d"] - p["b"]
    As = np.linspace(p["b"], a_max, p["d_count"])
    rows = _map(_family_point, [(a, p["a_sweep_d"], p["b"], p["n"]) for a in As], jobs)
    files.append(("families_a.csv", _write_rows(
        out / "families_a.csv", ["param", "alpha24", "beta_w2", "beta_sobolev"],
        [(a, *r) for a, r in zip(As, rows)])))
    sig = np.geomspace(p["sigma_min"], p["sigma_max"], p["sigma_count"])
    rows = _map(_gauss_point, [(s, p["n"]) for s in sig], jobs)
    files.append(("families_sigma.csv", _write_rows(
        out / "families_sigma.csv", ["param", "alpha24", "beta_w2", "beta_sobolev"],
        [(s, *r) for s, r in zip(sig, rows)])))
    return files


IDENTITY_TOL = 1e-10


def run_identity_check(p, out: Path, jobs: int):
    rng = np.random.default_rng(p["seed"])
    rows = []
    for k in range(p["count"]):
        u = random_mixture(rng, p["n"]).normalized()
        w2, sob = w2_quantile(u), h_minus1_1d(u)
        rows.append((str(k), w2, sob, abs(w2 - sob)))
    n = _write_rows(out / "lemma_check.csv", ["index", "w2", "sobolev", "abs_diff"], rows)
    worst = max(r[3] for r in rows)
    if worst > IDENTITY_TOL:
        raise ConsistencyError(f"quantile and CDF integrals differ by {worst:.3e}")
    return [("lemma_check.csv", n)]


def run_periodized(p, out: Path, jobs: int):
    ds = d_sweep(p)
    rows = _map(_periodized_point, [(p["a"], d, p["b"], p["n"]) for d in ds], jobs)
    n = _write_rows(out / "periodized.csv", ["d", "beta_squared", "beta_periodized"],
                    [(d, *r) for d, r in zip(ds, rows)])
    return [("periodized.csv", n)]


def run_extended(p, out: Path, jobs: int):
    ds = d_sweep(p)
    rows = _map(_extended_point, [(p["a"], d, p["b"], p["n"], p["margin"]) for d in ds], jobs)
    n = _write_rows(out / "extended.csv", ["d", "beta_w2", "beta_sobolev"],
                    [(d, *r) for d, r in zip(ds, rows)])
    return [("extended.csv", n)]


def run_peyre(p, out: Path, jobs: int):
    rows = _map(_peyre_point, [(p["seed"], k, p["n"]) for k in range(p["count"])], jobs)
    n = _write_rows(out / "peyre.csv", ["index", "lower", "w2_lp", "upper", "sobolev"],
                    [(str(k), *r) for k, r in enumerate(rows)])
    return [("peyre.csv", n)]


def run_sturm(p, out: Path, jobs: int):
    prob = SLProblem.from_function(localized_metric, p["n"], p["count"])
    pairs = eigensolve(discretize_sl(prob), p["count"])
    std = score_localization(pairs, "standard")
    ext = score_localization(pairs, "extended", margin=p["margin"])
    return [("sturm.csv", write_sl_csv(out / "sturm.csv", pairs, std, ext))]


def _spread(x):
    x = np.asarray(x)
    return float((x.max() - x.min()) / x.max())


def run_np(p, out: Path, jobs: int):
    curves = range(len(SUPERFORMULA_CURVES)) if p["curve"] == 0 else [p["curve"] - 1]
    results = _map(_np_curve, [(k, p["N"], p["count"], p["grading"]) for k in curves], jobs)
    files, summary = [], []
    for k, (curve, scores) in zip(curves, results):
        name = f"np_curve{k + 1}.csv"
        files.append((name, write_np_scores_csv(scores, out / name)))
        geo = f"np_curve{k + 1}_geometry.csv"
        files.append((geo, write_curve_csv(curve, out / geo)))
        sa, sb = _spread(scores[:, 1]), _spread(scores[:, 2])
        summary.append((str(k + 1), sa, sb, "ok" if sb >= sa else "flag"))
    files.append(("np_spread.csv", _write_rows(
        out / "np_spread.csv", ["curve", "alpha24_inv_spread", "beta_spread", "status"], summary)))
    return files


def ellipse_mask(n: int, semi_x: float, semi_y: float) -> MaskedGrid2D:
    """Ellipse centered in the unit square, as an ``n x n`` cell mask."""
    c = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c, c, indexing="ij")
    mask = ((X - 0.5) / semi_x) ** 2 + ((Y - 0.5) / semi_y) ** 2 < 1.0
    return MaskedGrid2D(Interval(0.0, 1.0), Interval(0.0, 1.0), mask)


def run_ot2d(p, out: Path, jobs: int):
    grid = ellipse_mask(p["nx"], p["semi_x"], p["semi_y"])
    check_mask_topology(grid.mask)
    segments = mask_boundary_segments(grid)
    ds = np.linspace(0.0, p["d_max"], p["d_count"])
    rows = _map(_ot2d_point, [(grid, d, p["width"], segments) for d in ds], jobs)
    n = _write_rows(out / "ot2d.csv", ["d", "cost", "separable"],
                    [(d, *r) for d, r in zip(ds, rows)])
    return [("ot2d.csv", n)]


EXPERIMENTS = {
    "families": run_families,
    "lemma-check": run_identity_check,
    "periodized": run_periodized,
    "extended": run_extended,
    "peyre": run_peyre,
    "sturm": run_sturm,
    "np": run_np,
    "ot2d": run_ot2d,
}


def run_experiment(cfg: ExperimentConfig):
    """Run one experiment and write ``manifest.csv``; return the file list."""
    fn = EXPERIMENTS.get(cfg.tag)
    if fn is None:
        raise ParameterError(f"unknown experiment {cfg.tag!r}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = fn(cfg.params, out, cfg.jobs)
    with (out / "manifest.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["file", "rows"])
        for name, rows in files:
            w.writerow([name, str(rows)])
    return files
