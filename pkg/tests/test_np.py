import csv

import numpy as np
import pytest

from locz.errors import ParameterError, ResolutionError
from locz.neumann_poincare import (
    CIRCLE, DEFAULT_GRADING, SUPERFORMULA_CURVES, SuperformulaParams, _order_by_modulus,
    _segments_cross, node_map, np_eigensolve, np_matrix, np_spectrum, sample_curve,
    score_np_localization, score_np_sobolev, superformula, write_curve_csv,
    write_np_scores_csv,
)


class TestSuperformula:
    def test_circle(self):
        np.testing.assert_allclose(superformula(CIRCLE, np.linspace(0, 1, 17)), 1.0, atol=1e-15)

    def test_first_curve_at_zero(self):
        assert superformula(SUPERFORMULA_CURVES[0], 0.0) == pytest.approx(1.44 ** (8 / 1.4), rel=1e-14)
        assert 1.44 ** (8 / 1.4) == pytest.approx(8.034, abs=1e-3)

    @pytest.mark.parametrize("p", SUPERFORMULA_CURVES)
    def test_periodic_and_positive(self, p):
        t = np.linspace(0, 1, 101)
        np.testing.assert_allclose(superformula(p, t + 1.0), superformula(p, t), rtol=1e-12)
        assert np.all(superformula(p, t) > 0)

    def test_parameter_errors(self):
        with pytest.raises(ParameterError):
            SuperformulaParams(4, 0, 2, 2)
        with pytest.raises(ParameterError):
            SuperformulaParams(4, 1, 2, 2, a=0)
        with pytest.raises(ParameterError):
            superformula(SuperformulaParams(4, 1, 2, -2), 0.0)


class TestGeometry:
    def test_circle(self):
        c = sample_curve(CIRCLE, 128)
        assert c.length() == pytest.approx(2 * np.pi, rel=1e-13)
        np.testing.assert_allclose(c.speed, 2 * np.pi, atol=1e-8)
        np.testing.assert_allclose(c.curvature, 1.0, atol=1e-11)
        np.testing.assert_allclose(c.normals, c.points, atol=1e-12)

    @pytest.mark.parametrize("p", SUPERFORMULA_CURVES)
    @pytest.mark.parametrize("g", [0.0, DEFAULT_GRADING])
    def test_total_curvature(self, p, g):
        assert sample_curve(p, 2048, grading=g).total_curvature() == pytest.approx(2 * np.pi, abs=1e-8)

    @pytest.mark.parametrize("p", SUPERFORMULA_CURVES)
    def test_grading_accelerates_convergence(self, p):
        ref = sample_curve(p, 4096).length()
        a = abs(sample_curve(p, 512).length() - ref)
        b = abs(sample_curve(p, 512, grading=DEFAULT_GRADING).length() - ref)
        assert b <= max(a, 1e-12)
        c = sample_curve(p, 1024, grading=DEFAULT_GRADING)
        assert c.total_curvature() == pytest.approx(2 * np.pi, abs=1e-8)

    def test_sizes(self):
        for N in (32, 65):
            with pytest.raises(ParameterError):
                sample_curve(CIRCLE, N)

    def test_segment_crossing(self):
        bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float)
        assert _segments_cross(bowtie)
        square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        assert not _segments_cross(square)


class TestNodeMap:
    def test_zero_is_identity(self):
        m = node_map(SUPERFORMULA_CURVES[0], 0.0)
        assert m.uniform
        s = np.linspace(0, 1, 9)
        np.testing.assert_array_equal(m.theta_of_s(s), s)

    @pytest.mark.parametrize("p", SUPERFORMULA_CURVES)
    def test_inverse_and_monotone(self, p):
        m = node_map(p, DEFAULT_GRADING)
        s = np.arange(1024) / 1024
        t = m.theta_of_s(s)
        assert np.all(np.diff(t) > 0)
        np.testing.assert_allclose(m.s_of_theta(t), s, atol=1e-13)
        assert m.s_of_theta(1.0) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("p", SUPERFORMULA_CURVES)
    def test_density_positive_and_concentrated(self, p):
        m = node_map(p, DEFAULT_GRADING)
        t = np.arange(4096) / 4096
        rho = m.density(t)
        assert rho.min() > 0 and rho.mean() == pytest.approx(1.0, abs=1e-12)
        # more nodes where the curve turns
        c = sample_curve(p, 4096)
        turn = np.abs(c.curvature) * c.speed
        assert rho[np.argmax(turn)] > 1.0 > rho[np.argmin(turn)]

    def test_range(self):
        for g in (-0.1, 1.0):
            with pytest.raises(ParameterError):
                node_map(CIRCLE, g)


class TestSpectrum:
    def test_circle_oracle(self):
        c = sample_curve(CIRCLE, 256)
        lam = np.linalg.eigvals(np_matrix(c))
        k = int(np.argmin(lam.real))
        assert lam[k].real == pytest.approx(-1.0, abs=1e-12)
        assert np.max(np.abs(np.delete(lam, k))) <= 1e-8
        pairs = np_eigensolve(np_matrix(c), 1, c)
        assert pairs[0].eigenvalue == pytest.approx(-1.0, abs=1e-12)
        np.testing.assert_allclose(np.abs(pairs[0].phi), 1 / np.sqrt(256), atol=1e-12)
        alpha_inv, beta = score_np_localization(pairs)[0, 1:]
        assert alpha_inv == pytest.approx(1.0, abs=1e-12) and beta == pytest.approx(0.0, abs=1e-12)

    def test_counts(self):
        c = sample_curve(CIRCLE, 64)
        with pytest.raises(ParameterError):
            np_eigensolve(np_matrix(c), 17, c)

    def test_complex_spectrum_rejected(self):
        c = sample_curve(CIRCLE, 64)
        R = np.zeros((64, 64))
        for i in range(0, 64, 2):
            R[i, i + 1], R[i + 1, i] = 1.0, -1.0
        with pytest.raises(ResolutionError, match="increase N"):
            np_eigensolve(R, 10, c)

    def test_tie_ordering(self):
        lam = np.array([0.2, 0.5, -0.5 + 1e-14, 0.1], complex)
        assert list(_order_by_modulus(lam, 1e-12)) == [2, 1, 0, 3]

    @pytest.mark.parametrize("p", SUPERFORMULA_CURVES)
    def test_pullback_and_scores(self, p):
        curve, pairs = np_spectrum(p, 256, 20)
        assert curve.nodes is not None
        for pr in pairs:
            assert pr.density.mass == pytest.approx(1.0, abs=1e-12)
            assert np.all(pr.density.values >= 0)
        mods = np.abs([pr.eigenvalue for pr in pairs])
        assert np.all(np.diff(mods) <= 1e-10 * mods[0])
        s = score_np_localization(pairs)
        assert s.shape == (len(pairs), 3)
        np.testing.assert_allclose(score_np_sobolev(pairs), s[:, 2], atol=1e-10)

    def test_graded_pullback_matches_uniform(self):
        p = SUPERFORMULA_CURVES[2]
        _, a = np_spectrum(p, 512, 3, grading=0.0)
        _, b = np_spectrum(p, 512, 3, grading=DEFAULT_GRADING)
        # the leading eigenvalue is simple
        assert b[0].eigenvalue == pytest.approx(a[0].eigenvalue, abs=1e-8)
        np.testing.assert_allclose(b[0].density.values, a[0].density.values, atol=1e-6)

    def test_uniform_nodes_less_stable_on_sharp_curve(self):
        p = SUPERFORMULA_CURVES[1]
        rel = {}
        for g in (0.0, DEFAULT_GRADING):
            a, b = (np.abs([q.eigenvalue for q in np_spectrum(p, N, 10, grading=g)[1]])
                    for N in (512, 1024))
            rel[g] = np.max(np.abs(a - b) / b)
        assert rel[DEFAULT_GRADING] <= 1e-6 < rel[0.0]

    def test_accumulation_at_zero(self):
        p = SUPERFORMULA_CURVES[0]
        small = []
        for N in (256, 512):
            lam = np.linalg.eigvals(np_matrix(sample_curve(p, N, DEFAULT_GRADING)))
            small.append(int(np.sum(np.abs(lam) < 0.1)))
        assert small[1] > small[0]


def test_csvs(tmp_path):
    curve, pairs = np_spectrum(SUPERFORMULA_CURVES[2], 128, 5)
    assert write_curve_csv(curve, tmp_path / "g.csv") == 128
    rows = list(csv.reader((tmp_path / "g.csv").open()))
    assert rows[0] == ["theta", "x", "y", "speed", "curvature"] and len(rows) == 129
    s = score_np_localization(pairs)
    assert write_np_scores_csv(s, tmp_path / "s.csv") == len(pairs)
    rows = list(csv.reader((tmp_path / "s.csv").open()))
    assert rows[0] == ["eigenvalue", "alpha24_inv", "beta"]
    assert float(rows[1][0]) == s[0, 0]
