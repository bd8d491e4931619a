"""Tilted-potential machinery: values, gradients, projections, hinges."""

import math

import numpy as np
import pytest

from pdlmc.core import (ConfigurationError, DifferentiableField, DualState,
                        NumericError, Problem, check_problem_gradients,
                        finite_diff_grad, hinge_constraint, linear_field,
                        project_nonneg, quadratic_field, u_grad, u_value)
from pdlmc.datasets import synthetic_adult_table, correlated_pair_returns
from pdlmc.problems import (Ball, GaussianMomentSpec, Interval,
                            LogisticFairnessSpec, MarketSpec,
                            TruncatedGaussianSpec, make_gaussian_moment,
                            make_logistic_fairness, make_market,
                            make_truncated_gaussian)


def interval_problem(slack=0.0):
    return make_truncated_gaussian(
        TruncatedGaussianSpec(mean=[0.0], region=Interval(1.0, 3.0), slack=slack))


def boundary_s():
    # s(x) = (x-1)(x-3), the raw interval boundary function
    return interval_problem().support[0]


class TestUValue:
    def test_zero_multiplier_kills_constraint_term(self):
        p = interval_problem()
        assert u_value(p, [0.0], DualState(np.zeros(1), np.zeros(0))) == 0.0

    def test_hand_evaluation_with_active_multiplier(self):
        # f(0)=0, g(0)=[(0-1)(0-3)]_+=3, so U = 0 + 2*3
        p = interval_problem()
        val = u_value(p, [0.0], DualState(np.array([2.0]), np.zeros(0)))
        assert val == pytest.approx(6.0, abs=1e-12)

    def test_equality_constraint_vanishes_at_pinned_point(self):
        b = np.array([1.0, -0.5])
        p = make_gaussian_moment(GaussianMomentSpec(b=b))
        val = u_value(p, b, DualState(np.zeros(0), b))
        assert val == pytest.approx(0.625, abs=1e-12)

    def test_affine_in_dual_variables(self):
        p = make_truncated_gaussian(TruncatedGaussianSpec(
            mean=[2.0, 2.0], region=Ball([0.0, 0.0], 1.0), slack=0.001))
        rng = np.random.default_rng(5)
        for _ in range(50):
            x = rng.uniform(-3, 3, size=2)
            l1, l2 = rng.uniform(0, 5, size=2)
            alpha = rng.uniform(0, 1)
            mix = alpha * l1 + (1 - alpha) * l2
            lhs = u_value(p, x, DualState(np.array([mix]), np.zeros(0)))
            rhs = (alpha * u_value(p, x, DualState(np.array([l1]), np.zeros(0)))
                   + (1 - alpha) * u_value(p, x, DualState(np.array([l2]), np.zeros(0))))
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_dimension_mismatch_rejected(self):
        p = interval_problem()
        with pytest.raises(ConfigurationError):
            u_value(p, [0.0, 1.0], DualState(np.zeros(1), np.zeros(0)))

    def test_negative_multiplier_rejected(self):
        with pytest.raises(ConfigurationError):
            DualState(np.array([-1.0]), np.zeros(0))


class TestUGrad:
    def test_unconstrained_reduces_to_potential_gradient(self):
        p = Problem(dim=1, f=quadratic_field([0.0]), label="plain")
        g = u_grad(p, [3.0], DualState(np.zeros(0), np.zeros(0)))
        assert g[0] == 3.0

    def test_active_hinge_contributes_its_subgradient(self):
        # at x=0 the hinge is active: grad = 0 + 1*(2*0-4) = -4
        p = interval_problem()
        g = u_grad(p, [0.0], DualState(np.array([1.0]), np.zeros(0)))
        assert g[0] == pytest.approx(-4.0, abs=1e-12)

    def test_inactive_hinge_contributes_nothing(self):
        p = interval_problem()
        g = u_grad(p, [2.0], DualState(np.array([5.0]), np.zeros(0)))
        assert g[0] == pytest.approx(2.0, abs=1e-12)

    def test_zero_duals_equal_plain_gradient_exactly(self):
        p = make_truncated_gaussian(TruncatedGaussianSpec(
            mean=[2.0, 2.0], region=Ball([0.0, 0.0], 1.0), slack=0.001))
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.uniform(-3, 3, size=2)
            g = u_grad(p, x, DualState(np.zeros(1), np.zeros(0)))
            assert np.array_equal(g, p.f.grad(x))

    def test_nonfinite_field_named_in_error(self):
        bad = DifferentiableField(lambda x: float("nan"), lambda x: x,
                                  name="broken-field")
        p = Problem(dim=1, f=quadratic_field([0.0]), ineq=(bad,), label="bad")
        with pytest.raises(NumericError, match="broken-field"):
            p.ineq_values(np.array([1.0]))


class TestProjectNonneg:
    def test_clamps_negatives(self):
        assert np.array_equal(project_nonneg([-1.0, 2.0, 0.0]), [0.0, 2.0, 0.0])

    def test_zero_fixed_point(self):
        assert np.array_equal(project_nonneg([0.0, 0.0]), [0.0, 0.0])

    def test_tiny_negative_clamps_to_exact_zero(self):
        out = project_nonneg([-1e-12])
        assert out[0] == 0.0

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            v = rng.uniform(-5, 5, size=rng.integers(1, 8))
            once = project_nonneg(v)
            assert np.array_equal(project_nonneg(once), once)


class TestHinge:
    def test_outside_value_and_gradient(self):
        h = hinge_constraint(boundary_s())
        x = np.array([5.0])
        assert h.value(x) == pytest.approx(8.0, abs=1e-12)
        assert h.grad(x)[0] == pytest.approx(6.0, abs=1e-12)

    def test_interior_is_flat(self):
        h = hinge_constraint(boundary_s())
        x = np.array([2.0])
        assert h.value(x) == 0.0
        assert h.grad(x)[0] == 0.0

    def test_boundary_subgradient_selection_is_zero(self):
        ball = make_truncated_gaussian(TruncatedGaussianSpec(
            mean=[2.0, 2.0], region=Ball([0.0, 0.0], 1.0)))
        h = ball.ineq[0]
        x = np.array([1.0, 0.0])
        assert h.value(x) == 0.0
        assert np.array_equal(h.grad(x), np.zeros(2))

    def test_negative_slack_rejected(self):
        with pytest.raises(ConfigurationError):
            hinge_constraint(boundary_s(), slack=-0.1)


class TestFiniteDiff:
    def test_quadratic_is_exact_to_roundoff(self):
        f = quadratic_field([0.0])
        got = finite_diff_grad(f, [3.0], step=1e-5)
        assert got[0] == pytest.approx(3.0, abs=1e-9)

    def test_two_dimensional(self):
        f = quadratic_field([0.0, 0.0])
        got = finite_diff_grad(f, [1.0, 2.0], step=1e-5)
        np.testing.assert_allclose(got, [1.0, 2.0], atol=1e-8)

    def test_logistic_potential_matches_analytic_gradient(self):
        table = synthetic_adult_table(n_rows=200, seed=77)
        p = make_logistic_fairness(LogisticFairnessSpec(table=table))
        rng = np.random.default_rng(3)
        for _ in range(100):
            theta = rng.uniform(-2, 2, size=p.dim)
            analytic = p.f.grad(theta)
            numeric = finite_diff_grad(p.f, theta, step=1e-5)
            rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic)
            assert rel < 1e-5

    def test_nonpositive_step_rejected(self):
        with pytest.raises(ConfigurationError):
            finite_diff_grad(quadratic_field([0.0]), [1.0], step=0.0)


def _builtin_problems():
    table = synthetic_adult_table(n_rows=300, seed=9)
    _, series = correlated_pair_returns(n_days=100, seed=2)
    return [
        interval_problem(slack=0.005),
        make_truncated_gaussian(TruncatedGaussianSpec(
            mean=[2.0, 2.0], region=Ball([0.0, 0.0], 1.0), slack=0.001)),
        make_gaussian_moment(GaussianMomentSpec(b=[1.0, -0.5])),
        make_logistic_fairness(LogisticFairnessSpec(table=table)),
        make_market(MarketSpec(return_series=series, target_means=[0.5, 0.1])),
    ]


@pytest.mark.parametrize("problem", _builtin_problems(),
                         ids=lambda p: p.label)
def test_every_builtin_field_passes_gradient_check(problem):
    check_problem_gradients(problem, n_points=100, seed=123)


def test_linear_field_has_constant_gradient():
    f = linear_field(2.0, [1.0, -1.0])
    assert f.value(np.array([3.0, 1.0])) == 4.0
    assert np.array_equal(f.grad(np.array([9.0, 9.0])), [1.0, -1.0])
