import csv

import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from locz.density import GridDensity1D, Interval, MaskedGrid2D, StepFamilyParams, make_step_family
from locz.errors import BudgetExceededError, ParameterError
from locz.ot import (
    CostKernel, DiscreteMeasure, atomize, distance_to_boundary_field, distance_to_segments,
    mask_boundary_segments, reduced_costs, separable_cost_value, solve_exact, two_bump_2d,
    uniform_measure_like, write_plan_csv,
)

UNIT = Interval(0.0, 1.0)
SQ = CostKernel.squared_euclidean()


def random_measure(rng, k, dim=1, zeros=0):
    w = rng.random(k)
    if zeros:
        w[rng.choice(k, zeros, replace=False)] = 0.0
    return DiscreteMeasure(rng.random((k, dim)), w / w.sum())


def highs_cost(mu, nu, kernel):
    C = kernel(mu.locations, nu.locations)
    m, n = C.shape
    r = np.repeat(np.arange(m), n)
    c = np.tile(np.arange(n), m)
    A = coo_matrix((np.ones(2 * m * n), (np.r_[r, m + c], np.r_[np.arange(m * n), np.arange(m * n)])),
                   shape=(m + n, m * n))
    res = linprog(C.ravel(), A_eq=A, b_eq=np.r_[mu.weights, nu.weights], bounds=(0, None),
                  method="highs")
    assert res.status == 0
    return res.fun


def check_certificate(plan, mu, nu, kernel, tol=1e-9):
    P = plan.to_dense()
    np.testing.assert_allclose(P.sum(axis=1), mu.weights, atol=tol)
    np.testing.assert_allclose(P.sum(axis=0), nu.weights, atol=tol)
    assert np.all(plan.mass >= 0)
    assert plan.support_size <= len(mu) + len(nu) - 1
    rc = reduced_costs(plan, mu, nu, kernel)
    assert rc.min() >= -tol
    on = plan.mass > 0
    assert np.abs(rc[plan.rows[on], plan.cols[on]]).max() <= tol
    assert plan.cost == pytest.approx(float(np.sum(P * kernel(mu.locations, nu.locations))), abs=1e-12)


class TestMeasures:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            DiscreteMeasure([0.0, 1.0], [0.5, 0.6])

    def test_negative_weight(self):
        with pytest.raises(ParameterError):
            DiscreteMeasure([0.0, 1.0], [1.5, -0.5])

    def test_atomize_constant(self):
        mu = atomize(GridDensity1D(UNIT, np.ones(4)))
        np.testing.assert_allclose(mu.locations[:, 0], [0.125, 0.375, 0.625, 0.875])
        np.testing.assert_allclose(mu.weights, 0.25)

    def test_atomize_drops_zero_cells(self):
        u = make_step_family(StepFamilyParams(0.1, 0.3, 0.05), 100)
        mu = atomize(u)
        assert len(mu) == 20
        assert mu.weights.sum() == pytest.approx(1.0, abs=1e-15)

    def test_atomize_mask(self):
        mask = np.zeros((4, 4), bool)
        mask[1:3, :] = True
        g = MaskedGrid2D(UNIT, UNIT, mask).with_values(mask * 2.0)
        mu = atomize(g)
        assert len(mu) == 8
        assert np.all((mu.locations[:, 0] > 0.25) & (mu.locations[:, 0] < 0.75))

    def test_atomize_needs_unit_mass(self):
        with pytest.raises(ParameterError):
            atomize(GridDensity1D(UNIT, np.full(4, 3.0)))


class TestKernels:
    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(0)
        X = rng.random((7, 1))
        for k in (SQ, CostKernel.periodized_1d(1.0)):
            C = k(X, X)
            np.testing.assert_allclose(C, C.T)
            assert C.min() >= 0
            np.testing.assert_allclose(np.diag(C), 0.0)

    def test_periodized_below_squared(self):
        rng = np.random.default_rng(1)
        X, Y = rng.random((20, 1)), rng.random((30, 1))
        assert np.all(CostKernel.periodized_1d(1.0)(X, Y) <= SQ(X, Y) + 1e-15)

    def test_periodized_is_1d_only(self):
        with pytest.raises(ParameterError):
            CostKernel.periodized_1d(1.0)(np.zeros((2, 2)), np.zeros((2, 2)))

    def test_pairs_match_matrix(self):
        rng = np.random.default_rng(2)
        X, Y = rng.random((9, 1)), rng.random((9, 1))
        for k in (SQ, CostKernel.periodized_1d(1.0)):
            np.testing.assert_allclose(k.pairs(X, Y), np.diag(k(X, Y)))

    def test_boundary_kernel_is_separable(self):
        seg = np.array([[[0, 0], [1, 0]], [[1, 0], [1, 1]], [[1, 1], [0, 1]], [[0, 1], [0, 0]]], float)
        k = CostKernel.distance_to_boundary(seg)
        assert k.separable and not SQ.separable
        X = np.array([[0.5, 0.5], [0.1, 0.7]])
        np.testing.assert_allclose(k(X, X), [[1.0, 0.6], [0.6, 0.2]])

    def test_segment_distance(self):
        seg = np.array([[[0.0, 0.0], [1.0, 0.0]]])
        d = distance_to_segments(np.array([[0.5, 0.3], [-1.0, 0.0], [2.0, 1.0]]), seg)
        np.testing.assert_allclose(d, [0.3, 1.0, np.sqrt(2.0)])


class TestSolver:
    def test_identity_coupling(self):
        mu = random_measure(np.random.default_rng(3), 12)
        for k in (SQ, CostKernel.periodized_1d(1.0)):
            plan = solve_exact(mu, mu, k)
            assert plan.cost == pytest.approx(0.0, abs=1e-15)
            P = plan.to_dense()
            np.testing.assert_allclose(np.diag(P), mu.weights, atol=1e-15)

    def test_two_atom_pairing(self):
        mu = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
        nu = DiscreteMeasure([0.25, 0.75], [0.5, 0.5])
        plan = solve_exact(mu, nu, SQ)
        assert plan.cost == pytest.approx(0.0625, abs=1e-15)
        np.testing.assert_allclose(plan.to_dense(), [[0.5, 0.0], [0.0, 0.5]])

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_highs(self, seed):
        rng = np.random.default_rng(100 + seed)
        dim = 1 + seed % 2
        mu = random_measure(rng, int(rng.integers(4, 40)), dim, zeros=seed % 3)
        nu = random_measure(rng, int(rng.integers(4, 40)), dim, zeros=(seed + 1) % 3)
        kernel = CostKernel.periodized_1d(1.0) if (dim == 1 and seed % 4 == 1) else SQ
        plan = solve_exact(mu, nu, kernel)
        assert plan.cost == pytest.approx(highs_cost(mu, nu, kernel), abs=1e-10)
        check_certificate(plan, mu, nu, kernel)

    def test_degenerate_equal_weights(self):
        # identical uniform weights give massively degenerate bases
        x = np.linspace(0, 1, 30)
        mu = DiscreteMeasure(x, np.full(30, 1 / 30))
        nu = DiscreteMeasure(x[::-1] ** 2, np.full(30, 1 / 30))
        plan = solve_exact(mu, nu, SQ)
        assert plan.cost == pytest.approx(highs_cost(mu, nu, SQ), abs=1e-12)
        check_certificate(plan, mu, nu, SQ)

    def test_integer_grid_ties(self):
        rng = np.random.default_rng(5)
        mu = DiscreteMeasure(rng.integers(0, 4, (25, 2)), np.full(25, 0.04))
        nu = DiscreteMeasure(rng.integers(0, 4, (20, 2)), np.full(20, 0.05))
        plan = solve_exact(mu, nu, SQ)
        assert plan.cost == pytest.approx(highs_cost(mu, nu, SQ), abs=1e-12)
        check_certificate(plan, mu, nu, SQ)

    def test_larger_problem_certificate(self):
        rng = np.random.default_rng(6)
        mu, nu = random_measure(rng, 300, 2), random_measure(rng, 250, 2)
        plan = solve_exact(mu, nu, SQ)
        check_certificate(plan, mu, nu, SQ)

    def test_budget(self):
        mu = random_measure(np.random.default_rng(7), 50)
        with pytest.raises(BudgetExceededError, match="separable"):
            solve_exact(mu, mu, SQ, budget=100)

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(8)
        with pytest.raises(ParameterError):
            solve_exact(random_measure(rng, 3, 1), random_measure(rng, 3, 2), SQ)

    def test_pruned_atoms_keep_dual_feasibility(self):
        mu = DiscreteMeasure([0.0, 0.5, 1.0], [0.5, 1e-18, 0.5])
        nu = DiscreteMeasure([0.2, 0.8], [0.5, 0.5])
        plan = solve_exact(mu, nu, SQ)
        assert plan.shape == (3, 2)
        assert reduced_costs(plan, mu, nu, SQ).min() >= -1e-12

    def test_plan_csv(self, tmp_path):
        mu = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
        nu = DiscreteMeasure([0.25, 0.75], [0.5, 0.5])
        n = write_plan_csv(solve_exact(mu, nu, SQ), tmp_path / "p.csv")
        rows = list(csv.reader((tmp_path / "p.csv").open()))
        assert n == 2 and rows[0] == ["i", "j", "mass"]
        assert rows[1][:2] == ["0", "0"] and float(rows[1][2]) == 0.5


def square(n):
    return MaskedGrid2D(UNIT, UNIT, np.ones((n, n), bool))


def disc(n, r=0.4):
    c = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c, c, indexing="ij")
    return MaskedGrid2D(UNIT, UNIT, (X - 0.5) ** 2 + (Y - 0.5) ** 2 < r * r)


class TestBoundary:
    def test_square_distances(self):
        n = 9
        g = square(n)
        d = distance_to_boundary_field(g).reshape(n, n)
        h = 1 / n
        assert d[n // 2, n // 2] == pytest.approx(0.5, abs=1e-15)
        assert d[0, 4] == pytest.approx(h / 2)
        g8 = square(8)
        d8 = distance_to_boundary_field(g8).reshape(8, 8)
        assert d8[3, 3] == pytest.approx(0.5 - 1 / 16)

    def test_distances_positive_and_shrink(self):
        for n in (8, 16, 32):
            d = distance_to_boundary_field(disc(n))
            assert d.min() > 0
            assert d.min() == pytest.approx(0.5 / n, rel=1e-12)

    def test_segments_of_square(self):
        seg = mask_boundary_segments(square(4))
        assert seg.shape == (16, 2, 2)
        lengths = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1)
        assert lengths.sum() == pytest.approx(4.0)

    def test_rejects_bad_masks(self):
        m = np.zeros((6, 6), bool)
        m[0:2, 0:2] = m[4:6, 4:6] = True
        with pytest.raises(ParameterError):
            distance_to_boundary_field(MaskedGrid2D(UNIT, UNIT, m))

    def test_separable_shortcut_matches_lp(self):
        g = disc(16)
        segs = mask_boundary_segments(g)
        k = CostKernel.distance_to_boundary(segs)
        nu = uniform_measure_like(g)
        f = lambda X: distance_to_segments(X, segs)  # noqa: E731
        for d in (0.0, 0.2, 0.4):
            mu = atomize(two_bump_2d(g, d, 0.08))
            plan = solve_exact(mu, nu, k)
            assert plan.cost == pytest.approx(separable_cost_value(mu, nu, f, f), abs=1e-10)
            check_certificate(plan, mu, nu, k)

    def test_separable_zero_parts(self):
        mu = DiscreteMeasure([0.0, 1.0], [0.3, 0.7])
        assert separable_cost_value(mu, mu, np.zeros(2), np.zeros(2)) == 0.0

    def test_separable_constant_offset(self):
        g = disc(16)
        segs = mask_boundary_segments(g)
        nu = uniform_measure_like(g)
        f = lambda X: distance_to_segments(X, segs)  # noqa: E731
        const = separable_cost_value(nu, nu, np.zeros(len(nu)), f)
        mu = atomize(two_bump_2d(g, 0.3, 0.08))
        mean_f = float(np.dot(f(mu.locations), mu.weights))
        assert separable_cost_value(mu, nu, f, f) == pytest.approx(mean_f + const, abs=1e-15)


class TestTwoBump:
    def test_unit_mass_and_single_bump(self):
        g = disc(32)
        u0 = two_bump_2d(g, 0.0, 0.05)
        assert abs(u0.mass - 1.0) <= 1e-12
        i, j = np.unravel_index(np.argmax(u0.values), u0.values.shape)
        assert abs(g.xc[i] - 0.5) < 1 / 32 and abs(g.yc[j] - 0.5) < 1 / 32
        for d in (0.1, 0.3, 0.5):
            assert abs(two_bump_2d(g, d, 0.05).mass - 1.0) <= 1e-12

    def test_reflection_symmetry(self):
        u = two_bump_2d(disc(32), 0.4, 0.07)
        np.testing.assert_allclose(u.values, u.values[::-1, :], atol=1e-15)
        np.testing.assert_allclose(u.values, u.values[:, ::-1], atol=1e-15)

    def test_center_outside_mask(self):
        with pytest.raises(ParameterError):
            two_bump_2d(disc(32, r=0.3), 0.7, 0.05)
        with pytest.raises(ParameterError):
            two_bump_2d(disc(32), 0.2, 0.0)
