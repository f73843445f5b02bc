"""``locz`` command line.

    locz <experiment> [--config FILE] [--out DIR] [--jobs J] [--<param> VALUE ...]

Parameters come from built-in defaults, then a flat ``key = value`` config
file, then command-line flags. The output directory is taken from
``--out``, else ``$LOCZ_OUT``, else the config key ``out``, else
``./locz_out``. Exit status: 0 on success, 2 for usage errors, 3 for
numerical failures.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import NumericalError, ParameterError
from .experiments import ExperimentConfig, run_experiment
from .neumann_poincare import DEFAULT_GRADING

__all__ = ["main", "parse_config", "build_parser", "PARAMETERS", "UsageError"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Param:
    type: type
    default: object
    lo: float | None = None
    hi: float | None = None
    help: str = ""

    def convert(self, name: str, raw):
        try:
            value = self.type(raw)
        except (TypeError, ValueError):
            raise UsageError(f"--{name}: expected {self.type.__name__}, got {raw!r}") from None
        if self.type is float and value != value:
            raise UsageError(f"--{name}: NaN is not allowed")
        if self.lo is not None and value < self.lo:
            raise UsageError(f"--{name}: must be >= {self.lo}, got {value}")
        if self.hi is not None and value > self.hi:
            raise UsageError(f"--{name}: must be <= {self.hi}, got {value}")
        return value


_D_SWEEP = {
    "a": Param(float, 0.1, 0.0, 1.0, "position of the first bump"),
    "b": Param(float, 0.05, 1e-6, 0.5, "bump half-width"),
    "d_min": Param(float, 0.1, 0.0, 1.0, "first separation of the sweep"),
    "d_max": Param(float, 0.85, 0.0, 1.0, "last separation of the sweep"),
    "d_count": Param(int, 20, 2, 10_000, "number of sweep points"),
}

PARAMETERS: dict[str, dict[str, Param]] = {
    "families": {
        "n": Param(int, 1520, 16, 10**7, "grid cells on (0,1)"),
        **_D_SWEEP,
        "a_sweep_d": Param(float, 0.3, 0.0, 1.0, "separation held fixed in the position sweep"),
        "sigma_min": Param(float, 0.01, 1e-4, 1e3, "smallest Gaussian width"),
        "sigma_max": Param(float, 2.0, 1e-4, 1e3, "largest Gaussian width"),
        "sigma_count": Param(int, 20, 2, 10_000, "number of Gaussian widths"),
    },
    "lemma-check": {
        "n": Param(int, 4096, 16, 10**7, "grid cells on (0,1)"),
        "count": Param(int, 100, 1, 10**6, "random mixture densities"),
        "seed": Param(int, 0, 0, None, "random seed"),
    },
    "periodized": {
        "n": Param(int, 200, 16, 4096, "grid cells on (0,1)"),
        **_D_SWEEP,
    },
    "extended": {
        "n": Param(int, 1520, 16, 10**7, "grid cells on (0,1)"),
        **_D_SWEEP,
        "margin": Param(float, 2.0, 0.0, 100.0, "padding on each side of (0,1)"),
    },
    "peyre": {
        "n": Param(int, 128, 16, 4096, "grid cells on (0,1)"),
        "count": Param(int, 20, 1, 10**5, "random densities"),
        "seed": Param(int, 1, 0, None, "random seed"),
    },
    "sturm": {
        "n": Param(int, 2048, 16, 10**7, "grid cells on (0,1)"),
        "count": Param(int, 40, 1, None, "eigenpairs, at most n/8"),
        "margin": Param(float, 1.0, 0.0, 100.0, "padding for the extended score"),
    },
    "np": {
        "N": Param(int, 512, 64, 8192, "quadrature nodes (even)"),
        "count": Param(int, 60, 1, None, "eigenpairs, at most N/4"),
        "curve": Param(int, 0, 0, 3, "curve 1, 2 or 3; 0 runs all three"),
        "grading": Param(float, DEFAULT_GRADING, 0.0, 0.95, "node clustering toward high curvature (0 = uniform)"),
    },
    "ot2d": {
        "nx": Param(int, 48, 8, 256, "grid cells per side of the unit square"),
        "semi_x": Param(float, 0.45, 0.05, 0.5, "ellipse semi-axis along x"),
        "semi_y": Param(float, 0.3, 0.05, 0.5, "ellipse semi-axis along y"),
        "d_count": Param(int, 6, 2, 1000, "number of separations"),
        "d_max": Param(float, 0.6, 0.0, 1.0, "largest separation (the sweep starts at 0)"),
        "width": Param(float, 0.06, 1e-3, 1.0, "Gaussian bump width"),
    },
}


def _cross_checks(tag: str, p: dict):
    if "d_min" in p and p["d_min"] >= p["d_max"]:
        raise UsageError("--d_min must be smaller than --d_max")
    if tag == "families" and p["sigma_min"] >= p["sigma_max"]:
        raise UsageError("--sigma_min must be smaller than --sigma_max")
    if tag == "sturm" and p["count"] > p["n"] // 8:
        raise UsageError(f"--count must be at most n/8 = {p['n'] // 8}")
    if tag == "np":
        if p["N"] % 2:
            raise UsageError("--N must be even")
        if p["count"] > p["N"] // 4:
            raise UsageError(f"--count must be at most N/4 = {p['N'] // 4}")


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or not key or not value:
            raise UsageError(f"--config: line {lineno} is not 'key = value'")
        if key in out:
            raise UsageError(f"--config: key {key!r} given twice")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locz", description="Localization measures and transport experiments.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Output directory: --out, else $LOCZ_OUT, else config key 'out', "
               "else ./locz_out.\nExit codes: 0 success, 2 usage error, 3 numerical failure.")
    sub = parser.add_subparsers(dest="tag", metavar="experiment")
    for tag, params in PARAMETERS.items():
        sp = sub.add_parser(tag, help=f"run the {tag} experiment",
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", metavar="FILE", help="flat key = value parameter file")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        sp.add_argument("--jobs", metavar="J", help="worker processes for sweep points (default 1)")
        for name, prm in params.items():
            sp.add_argument(f"--{name}", dest=name, metavar=prm.type.__name__.upper(),
                            help=f"{prm.help} (default {prm.default})")
    return parser


def parse_config(argv) -> ExperimentConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.tag is None:
        raise UsageError("no experiment given; choose one of " + ", ".join(PARAMETERS))
    params = PARAMETERS[ns.tag]
    raw: dict[str, object] = {name: prm.default for name, prm in params.items()}
    file_values = read_config_file(ns.config) if ns.config else {}
    file_out = file_values.pop("out", None)
    file_jobs = file_values.pop("jobs", None)
    for key, value in file_values.items():
        if key not in params:
            raise UsageError(f"--config: unknown key {key!r} for {ns.tag}")
        raw[key] = value
    for name in params:
        flag = getattr(ns, name)
        if flag is not None:
            raw[name] = flag
    values = {name: params[name].convert(name, raw[name]) for name in params}
    _cross_checks(ns.tag, values)
    jobs_raw = ns.jobs if ns.jobs is not None else (file_jobs if file_jobs is not None else 1)
    jobs = Param(int, 1, 1, 1024).convert("jobs", jobs_raw)
    out = ns.out or os.environ.get("LOCZ_OUT") or file_out or "locz_out"
    return ExperimentConfig(ns.tag, values, Path(out), jobs)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:  # argparse: --help exits 0, bad syntax exits 2
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except UsageError as exc:
        print(f"locz: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        files = run_experiment(cfg)
    except ParameterError as exc:
        print(f"locz {cfg.tag}: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"locz {cfg.tag}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"locz {cfg.tag}: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for name, rows in files:
        print(f"{cfg.out / name}\t{rows}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
