"""Neumann-Poincare eigenfunctions on superformula curves.

The curve ``theta -> r(theta) (cos 2 pi theta, sin 2 pi theta)`` is sampled at
``theta_k = theta(s_k)`` with ``s_k = k / N``. By default ``theta(s) = s``. A
positive ``grading`` uses a smooth periodic reparametrization that places
more nodes where the curve turns quickly; the trapezoidal rule in ``s``
stays spectrally accurate. Derivatives come from FFT differentiation of the
periodic coordinates in ``s``. The operator

    N# phi(x) = -(1/pi) p.v. int ((x - y) . nu_x) / |x - y|^2 phi(y) dl(y)

has a smooth kernel on a smooth curve, with diagonal limit ``kappa(x) / 2``,
so the trapezoidal Nystrom matrix converges spectrally.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .density import GridDensity1D, Interval, format_float, participation_ratio
from .errors import ParameterError, ResolutionError
from .transport1d import h_minus1_1d, w2_quantile

__all__ = [
    "SuperformulaParams", "CurveSample", "NodeMap", "NPEigenPair", "SUPERFORMULA_CURVES", "CIRCLE",
    "DEFAULT_GRADING", "superformula", "node_map", "sample_curve", "np_matrix",
    "np_eigensolve", "np_spectrum", "score_np_localization", "score_np_sobolev",
    "write_curve_csv", "write_np_scores_csv",
]

IMAG_TOL = 1e-6
MAX_REJECTED_FRACTION = 0.05
TIE_TOL = 1e-10
DEFAULT_GRADING = 0.6
GRADING_MODES = 8


@dataclass(frozen=True)
class SuperformulaParams:
    m: float
    n1: float
    n2: float
    n3: float
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.n1 == 0:
            raise ParameterError("n1 must be nonzero")
        if self.a == 0 or self.b == 0:
            raise ParameterError("a and b must be nonzero")


CIRCLE = SuperformulaParams(4, 2, 2, 2, 1, 1)
SUPERFORMULA_CURVES = (
    SuperformulaParams(4, 1.4, 8, 2, 1.44, 1),
    SuperformulaParams(4, 4, 20, 20, 0.67, 1),
    SuperformulaParams(5, 3, 6, 6, 1, 1),
)


def superformula(p: SuperformulaParams, theta):
    """Radius ``(|a|^-n2 |cos(pi m t/2)|^n2 + |b|^-n3 |sin(pi m t/2)|^n3)^(-1/n1)``."""
    t = np.asarray(theta, dtype=float)
    c = np.abs(np.cos(np.pi * p.m * t / 2))
    s = np.abs(np.sin(np.pi * p.m * t / 2))
    with np.errstate(divide="ignore"):
        if (p.n2 < 0 and np.any(c == 0)) or (p.n3 < 0 and np.any(s == 0)):
            raise ParameterError("zero base raised to a negative exponent")
        base = abs(p.a) ** (-p.n2) * c ** p.n2 + abs(p.b) ** (-p.n3) * s ** p.n3
    if np.any(base == 0) and p.n1 > 0:
        raise ParameterError("superformula radius is infinite")
    r = base ** (-1.0 / p.n1)
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise ParameterError("superformula radius must be finite and positive")
    return r


@dataclass(frozen=True, eq=False)
class NodeMap:
    """Increasing periodic map ``s -> theta`` with ``d s / d theta = rho(theta)``.

    ``rho(t) = c_0 + 2 Re sum_{k >= 1} c_k exp(2 pi i k t)`` with ``c_0 = 1``.
    A single coefficient gives the identity.
    """

    coeffs: np.ndarray

    @property
    def uniform(self) -> bool:
        return self.coeffs.size == 1

    def _modes(self, t):
        k = np.arange(1, self.coeffs.size)
        return k, np.exp(2j * np.pi * np.outer(np.asarray(t, dtype=float), k))

    def density(self, t):
        if self.uniform:
            return np.ones(np.shape(t))
        _, E = self._modes(t)
        return 1.0 + 2.0 * np.real(E @ self.coeffs[1:])

    def s_of_theta(self, t):
        t = np.asarray(t, dtype=float)
        if self.uniform:
            return t.copy()
        k, E = self._modes(t)
        return t + 2.0 * np.real((E - 1.0) @ (self.coeffs[1:] / (2j * np.pi * k)))

    def theta_of_s(self, s):
        s = np.asarray(s, dtype=float)
        if self.uniform:
            return s.copy()
        # table lookup on the monotone map, then Newton polishing
        M = max(4096, 16 * s.size)
        tf = np.arange(M + 1) / M
        t = np.interp(s, self.s_of_theta(tf), tf)
        for _ in range(30):
            step = (self.s_of_theta(t) - s) / self.density(t)
            t = t - step
            if np.max(np.abs(step)) < 1e-15:
                break
        return t


UNIFORM_MAP = NodeMap(np.ones(1, dtype=complex))


@dataclass(frozen=True, eq=False)
class CurveSample:
    """Nodes of the quadrature rule on the curve.

    ``tangents`` and ``speed`` are derivatives with respect to the quadrature
    parameter ``s``; with the identity node map ``s = theta``.
    """

    theta: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    speed: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    nodes: NodeMap = UNIFORM_MAP

    @property
    def N(self) -> int:
        return self.theta.size

    def length(self) -> float:
        return float(np.mean(self.speed))

    def total_curvature(self) -> float:
        return float(np.mean(self.curvature * self.speed))


def _spectral_derivative(f):
    N = f.size
    k = np.fft.fftfreq(N, d=1.0 / N)
    if N % 2 == 0:
        k[N // 2] = 0.0
    F = np.fft.fft(f)
    d1 = np.real(np.fft.ifft(2j * np.pi * k * F))
    d2 = np.real(np.fft.ifft(-(2 * np.pi * k) ** 2 * F))
    return d1, d2


def _segments_cross(P, block: int = 256) -> bool:
    """True if two non-adjacent edges of the closed polygon ``P`` intersect."""
    N = P.shape[0]
    A, B = P, np.roll(P, -1, axis=0)
    D = B - A

    def orient(o, d, q):
        return d[..., 0] * (q[..., 1] - o[..., 1]) - d[..., 1] * (q[..., 0] - o[..., 0])

    idx = np.arange(N)
    for i0 in range(0, N, block):
        i = idx[i0:i0 + block, None]
        a, d, b = A[i], D[i], B[i]
        o1 = orient(a, d, A[None, :]) * orient(a, d, B[None, :])
        o2 = orient(A[None, :], D[None, :], a) * orient(A[None, :], D[None, :], b)
        gap = np.abs(i - idx[None, :])
        far = (gap > 1) & (gap < N - 1)
        if np.any((o1 < 0) & (o2 < 0) & far):
            return True
    return False


def _coordinates(p: SuperformulaParams, theta):
    r = superformula(p, theta)
    return r * np.cos(2 * np.pi * theta), r * np.sin(2 * np.pi * theta)


def node_map(p: SuperformulaParams, grading: float, modes: int = GRADING_MODES,
             fine: int = 8192) -> NodeMap:
    """Node density ``(1 - g) + g tau / mean(tau)`` smoothed by a Gaussian taper.

    ``tau = |kappa| |omega'|`` is the turning rate in ``theta``. The taper is a
    positive periodic kernel, so the density stays at or above ``1 - g`` up to
    the truncated tail.
    """
    if not 0.0 <= grading < 1.0:
        raise ParameterError(f"grading must lie in [0, 1), got {grading}")
    if grading == 0.0:
        return UNIFORM_MAP
    t = np.arange(fine) / fine
    x, y = _coordinates(p, t)
    (x1, x2), (y1, y2) = _spectral_derivative(x), _spectral_derivative(y)
    sp = np.hypot(x1, y1)
    tau = np.abs(x1 * y2 - y1 * x2) / sp ** 2
    rho = (1.0 - grading) + grading * tau / tau.mean()
    c = np.fft.rfft(rho) / fine
    k = np.arange(c.size)
    c = (c * np.exp(-0.5 * (k / modes) ** 2))[: 4 * modes + 1]
    c = c / c[0].real
    out = NodeMap(c)
    if out.density(t).min() <= 0.0:
        raise ParameterError("node density is not positive; lower the grading")
    return out


def sample_curve(p: SuperformulaParams, N: int, grading: float = 0.0) -> CurveSample:
    """Nodes, spectral tangents, outward normals and signed curvature."""
    if N < 64 or N % 2:
        raise ParameterError(f"N must be even and >= 64, got {N}")
    nodes = node_map(p, grading)
    theta = nodes.theta_of_s(np.arange(N) / N)
    x, y = _coordinates(p, theta)
    (x1, x2), (y1, y2) = _spectral_derivative(x), _spectral_derivative(y)
    speed = np.hypot(x1, y1)
    if np.any(speed <= 0):
        raise ParameterError("curve parametrization has a stationary point")
    pts = np.column_stack([x, y])
    if _segments_cross(pts):
        raise ParameterError("curve is self-intersecting")
    # counterclockwise orientation: (y', -x') points outward
    normals = np.column_stack([y1, -x1]) / speed[:, None]
    curvature = (x1 * y2 - y1 * x2) / speed ** 3
    return CurveSample(theta, pts, np.column_stack([x1, y1]), speed, normals, curvature, nodes)


def np_matrix(c: CurveSample) -> np.ndarray:
    """Trapezoidal Nystrom matrix of N#."""
    X = c.points
    diff = X[:, None, :] - X[None, :, :]
    r2 = np.einsum("jkd,jkd->jk", diff, diff)
    np.fill_diagonal(r2, 1.0)
    K = np.einsum("jkd,jd->jk", diff, c.normals) / r2
    np.fill_diagonal(K, 0.5 * c.curvature)
    return -(1.0 / np.pi) * K * (c.speed / c.N)[None, :]


@dataclass(frozen=True, eq=False)
class NPEigenPair:
    eigenvalue: float
    phi: np.ndarray
    density: GridDensity1D


def _trig_interpolation_matrix(N: int, s):
    """Rows evaluate the trigonometric interpolant of ``N`` nodal values at ``s``."""
    k = np.fft.fftfreq(N, d=1.0 / N)
    E = np.exp(2j * np.pi * np.outer(s, k)) / N
    if N % 2 == 0:
        E[:, N // 2] = np.cos(np.pi * N * s) / N
    F = np.fft.fft(np.eye(N), axis=0)
    return np.real(E @ F)


def _pullback_rows(c: CurveSample):
    """``(P, speed)`` such that ``P @ phi`` samples ``phi`` at ``theta_j = j / N``."""
    theta = np.arange(c.N) / c.N
    if c.nodes.uniform:
        return None, c.speed
    s = c.nodes.s_of_theta(theta)
    P = _trig_interpolation_matrix(c.N, s)
    # |d omega / d theta| = |d omega / d s| rho(theta)
    return P, (P @ c.speed) * c.nodes.density(theta)


def _pullback(phi, P, speed_theta) -> GridDensity1D:
    vals = phi if P is None else P @ phi
    w = speed_theta * np.abs(vals)
    return GridDensity1D(Interval(0.0, 1.0), w / np.mean(w))


def _order_by_modulus(lam, tol):
    """Descending ``|lambda|``; moduli within ``tol`` of their neighbor tie and
    are ordered by real part."""
    first = np.argsort(-np.abs(lam), kind="stable")
    mod = np.abs(lam[first])
    group = np.concatenate([[0], np.cumsum(-np.diff(mod) > tol)])
    return first[np.lexsort((lam.real[first], group))]


def np_eigensolve(matrix, count: int, curve: CurveSample) -> list[NPEigenPair]:
    """Largest-``|lambda|`` eigenpairs with eigenfunctions pulled back to (0, 1).

    The pullback lives on the uniform grid ``theta_j = j / N``; on a graded
    curve the eigenvector is carried there by trigonometric interpolation.
    Eigenvalues whose imaginary part exceeds ``1e-6`` of the spectral radius
    are discarded; if more than 5% of the requested ones go, the grid is too
    coarse and :class:`ResolutionError` is raised.
    """
    A = np.asarray(matrix, dtype=float)
    N = A.shape[0]
    if count < 1 or count > N // 4:
        raise ParameterError(f"count must lie in [1, N/4 = {N // 4}], got {count}")
    lam, vec = np.linalg.eig(A)
    rho = float(np.max(np.abs(lam)))
    order = _order_by_modulus(lam, TIE_TOL * rho)[:count]
    complex_ = np.abs(lam.imag[order]) > IMAG_TOL * rho
    if complex_.sum() > MAX_REJECTED_FRACTION * count:
        raise ResolutionError(
            f"{int(complex_.sum())} of {count} eigenvalues are complex beyond tolerance; "
            "increase N")
    P, speed_theta = _pullback_rows(curve)
    pairs = []
    for k in order[~complex_]:
        v = vec[:, k]
        v = v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
        phi = v.real / np.linalg.norm(v.real)
        if phi[np.flatnonzero(np.abs(phi) > 1e-14)[0]] < 0:
            phi = -phi
        pairs.append(NPEigenPair(float(lam[k].real), phi, _pullback(phi, P, speed_theta)))
    return pairs


def np_spectrum(p: SuperformulaParams, N: int, count: int,
                grading: float = DEFAULT_GRADING):
    """Sample, assemble and solve; returns ``(curve, pairs)``."""
    curve = sample_curve(p, N, grading=grading)
    return curve, np_eigensolve(np_matrix(curve), count, curve)


def score_np_localization(pairs) -> np.ndarray:
    """Rows ``(eigenvalue, alpha_{2,4}^{-1}, beta)`` for each eigenpair."""
    if not pairs:
        raise ParameterError("no eigenpairs to score")
    rows = []
    for pr in pairs:
        u = pr.density
        rows.append((pr.eigenvalue, 1.0 / participation_ratio(u, 2, 4), w2_quantile(u)))
    return np.array(rows)


def score_np_sobolev(pairs) -> np.ndarray:
    """Same densities scored with the CDF integrator instead of the quantile one."""
    return np.array([h_minus1_1d(pr.density) for pr in pairs])


def write_curve_csv(c: CurveSample, path) -> int:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "x", "y", "speed", "curvature"])
        for row in zip(c.theta, c.points[:, 0], c.points[:, 1], c.speed, c.curvature):
            w.writerow([format_float(v) for v in row])
    return c.N


def write_np_scores_csv(scores, path) -> int:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eigenvalue", "alpha24_inv", "beta"])
        for row in scores:
            w.writerow([format_float(v) for v in row])
    return len(scores)
