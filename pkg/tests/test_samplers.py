"""Runner behavior: primitive updates, determinism, collapses, feasibility."""

from dataclasses import replace

import numpy as np
import pytest

from pdlmc.core import (ConfigurationError, DifferentiableField, NumericError,
                        Problem, linear_field, quadratic_field)
from pdlmc.datasets import synthetic_adult_table
from pdlmc.diagnostics import ergodic_mean_x
from pdlmc.problems import (Ball, GaussianMomentSpec, Interval,
                            LogisticFairnessSpec, TruncatedGaussianSpec,
                            make_gaussian_moment, make_logistic_fairness,
                            make_truncated_gaussian, projector_for)
from pdlmc.samplers import (SamplerConfig, StepSchedule, constant,
                            inverse_sqrt, lmc_step, rejection_sample,
                            run_dlmc, run_dual_ascent_minibatch, run_lmc,
                            run_pdlmc, run_projected_lmc, sampler_config)

TRUNC1D = TruncatedGaussianSpec(mean=[0.0], region=Interval(1.0, 3.0), slack=0.005)


def trunc1d():
    return make_truncated_gaussian(TRUNC1D)


def vacuous_problem():
    # constraint g(x) = -1 is satisfiable everywhere with room to spare
    g = linear_field(-1.0, [0.0], name="vacuous")
    return Problem(dim=1, f=quadratic_field([0.0]), ineq=(g,), label="vacuous")


def trajectories_equal(a, b):
    return (np.array_equal(a.ks, b.ks) and np.array_equal(a.xs, b.xs)
            and np.array_equal(a.lams, b.lams) and np.array_equal(a.nus, b.nus)
            and np.array_equal(a.gs, b.gs) and np.array_equal(a.hs, b.hs))


class TestLmcStep:
    def test_drift_fixed_point(self):
        x = lmc_step(np.zeros(1), np.zeros(1), 0.1, np.zeros(1))
        assert np.array_equal(x, np.zeros(1))

    def test_pure_gradient_step(self):
        x = lmc_step(np.array([1.0]), np.array([1.0]), 0.5, np.zeros(1))
        assert x[0] == 0.5

    def test_unit_noise_scale_at_half_step(self):
        z = np.array([1.7, -0.3])
        x = lmc_step(np.zeros(2), np.zeros(2), 0.5, z)
        assert np.array_equal(x, z)


class TestStepSchedule:
    def test_constant(self):
        s = constant(1e-3)
        assert s.step(0) == s.step(10**6) == 1e-3

    def test_inverse_sqrt(self):
        s = inverse_sqrt(2.0)
        assert s.step(0) == 2.0
        assert s.step(3) == pytest.approx(1.0)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            StepSchedule("linear", 1.0)
        with pytest.raises(ConfigurationError):
            constant(0.0)


class TestConfigValidation:
    def test_bad_fields_rejected(self):
        with pytest.raises(ConfigurationError):
            sampler_config(1e-3, iterations=0)
        with pytest.raises(ConfigurationError):
            sampler_config(1e-3, iterations=10, burn_in_fraction=1.0)
        with pytest.raises(ConfigurationError):
            sampler_config(1e-3, iterations=10, minibatch=0)
        with pytest.raises(ConfigurationError):
            sampler_config(1e-3, iterations=10, dlmc_gamma=0.0)


class TestDeterminism:
    def test_each_runner_reproduces_bitwise(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, 1e-3, iterations=3000, seed=9, log_stride=1)
        for runner in (run_lmc, run_pdlmc, run_dual_ascent_minibatch, run_dlmc):
            a = runner(p, cfg, [0.0])
            b = runner(p, cfg, [0.0])
            assert trajectories_equal(a, b), runner.__name__

    def test_trajectory_log_contract(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, 1e-3, iterations=1005, seed=2, log_stride=100)
        traj = run_pdlmc(p, cfg, [0.0])
        assert traj.ks[0] == 0 and traj.ks[-1] == 1005
        assert np.all(np.diff(traj.ks) > 0)
        assert set(traj.ks[:-1]) == set(range(0, 1001, 100))

    def test_g_column_matches_logged_sample(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, 1e-3, iterations=500, seed=4, log_stride=7)
        traj = run_pdlmc(p, cfg, [0.0])
        g = p.ineq[0]
        recomputed = np.array([g.value(x) for x in traj.xs])
        assert np.array_equal(recomputed, traj.gs[:, 0])


class TestCollapses:
    def test_pdlmc_without_constraints_is_lmc(self):
        p = Problem(dim=2, f=quadratic_field([0.5, -0.5]), label="plain2d")
        cfg = sampler_config(1e-2, iterations=4000, seed=5, log_stride=1)
        assert trajectories_equal(run_lmc(p, cfg, [0.0, 0.0]),
                                  run_pdlmc(p, cfg, [0.0, 0.0]))

    def test_minibatch_one_is_pdlmc(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, 1e-3, iterations=4000, seed=6, log_stride=1)
        assert trajectories_equal(run_pdlmc(p, cfg, [0.0]),
                                  run_dual_ascent_minibatch(p, cfg, [0.0]))

    def test_single_step_warm_dlmc_is_pdlmc(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, 1e-3, iterations=4000, seed=6, log_stride=1,
                             dlmc_inner=1, dlmc_gamma=1e-3, dlmc_warm_start=True)
        assert trajectories_equal(run_pdlmc(p, cfg, [0.0]),
                                  run_dlmc(p, cfg, [0.0]))


class TestLmc:
    def test_standard_normal_moments(self):
        # fixed-seed regression: kept-half moments of the discretized chain
        # sit inside the empirical tolerance band for this seed
        p = Problem(dim=1, f=quadratic_field([0.0]), label="std-normal")
        cfg = sampler_config(1e-3, iterations=2_000_000, seed=14, log_stride=10)
        traj = run_lmc(p, cfg, [0.0])
        xs = traj.xs[traj.kept_slice(0.5):, 0]
        assert abs(xs.mean()) <= 0.01
        assert abs(xs.var() - 1.0) <= 0.03

    def test_logistic_posterior_chain_stays_finite(self):
        table = synthetic_adult_table(n_rows=500, seed=21)
        p = make_logistic_fairness(LogisticFairnessSpec(table=table))
        cfg = sampler_config(1e-4, iterations=20_000, seed=0, log_stride=100)
        traj = run_lmc(p, cfg, np.zeros(p.dim))
        assert np.isfinite(traj.xs).all()


class TestPdlmc:
    def test_vacuous_constraint_keeps_multiplier_at_zero(self):
        cfg = sampler_config(1e-2, 1e-2, iterations=2000, seed=3, log_stride=1)
        traj = run_pdlmc(vacuous_problem(), cfg, [0.0])
        assert np.array_equal(traj.lams, np.zeros_like(traj.lams))

    def test_multipliers_never_negative(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, 1e-2, iterations=20_000, seed=8, log_stride=1)
        traj = run_pdlmc(p, cfg, [0.0])
        assert traj.lams.min() >= 0.0

    def test_dual_cap_aborts_diverging_duals(self):
        # constant positive constraint value: lambda grows without bound
        g = linear_field(1.0, [0.0], name="always-violated")
        p = Problem(dim=1, f=quadratic_field([0.0]), ineq=(g,), label="runaway")
        cfg = sampler_config(1e-3, 1.0, iterations=10_000, seed=0,
                             log_stride=100, dual_cap=5.0)
        with pytest.raises(NumericError, match="cap"):
            run_pdlmc(p, cfg, [0.0])

    def test_nonfinite_iterate_reported_with_iteration(self):
        # exploding step size on a quadratic diverges to overflow
        p = Problem(dim=1, f=quadratic_field([0.0]), label="explode")
        cfg = sampler_config(1e6, iterations=5000, seed=0, log_stride=100)
        with pytest.raises(NumericError, match="iteration"):
            run_pdlmc(p, cfg, [1.0])


class TestDlmc:
    def test_equality_constraints_rejected(self):
        p = make_gaussian_moment(GaussianMomentSpec(b=[1.0]))
        cfg = sampler_config(1e-2, iterations=10, seed=0)
        with pytest.raises(ConfigurationError, match="inequality"):
            run_dlmc(p, cfg, [0.0])

    def test_vacuous_constraint_pins_multiplier(self):
        cfg = sampler_config(1e-2, 1e-2, iterations=500, seed=1, log_stride=1,
                             dlmc_inner=5, dlmc_gamma=1e-2)
        traj = run_dlmc(vacuous_problem(), cfg, [0.0])
        assert np.array_equal(traj.lams, np.zeros_like(traj.lams))

    def test_cold_restart_resets_chain(self):
        # with enormous inner step budget 1 and cold restarts, every outer
        # iterate is one noisy step away from x0
        p = vacuous_problem()
        cfg = sampler_config(1e-3, 1e-3, iterations=200, seed=2, log_stride=1,
                             dlmc_inner=1, dlmc_gamma=1e-3, dlmc_warm_start=False)
        traj = run_dlmc(p, cfg, [10.0])
        # one step from x0=10 moves at most ~|eta*grad| + noise; never drifts off
        assert np.all(np.abs(traj.xs[1:, 0] - 10.0) < 1.0)

    def test_two_timescale_estimates_truncated_mean(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, 1e-2, iterations=50_000, seed=1, log_stride=1,
                             dlmc_inner=100, dlmc_gamma=1e-3)
        traj = run_dlmc(p, cfg, [0.0])
        mean = ergodic_mean_x(traj)[0]
        assert abs(mean - 1.510) <= 0.07


class TestMinibatch:
    def test_vacuous_constraint_keeps_multiplier_at_zero(self):
        cfg = sampler_config(1e-2, 1e-2, iterations=300, seed=3, log_stride=1,
                             minibatch=7)
        traj = run_dual_ascent_minibatch(vacuous_problem(), cfg, [0.0])
        assert np.array_equal(traj.lams, np.zeros_like(traj.lams))

    def test_chain_advances_minibatch_steps_per_record(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, 1e-3, iterations=50, seed=3, log_stride=1,
                             minibatch=4)
        traj = run_dual_ascent_minibatch(p, cfg, [0.0])
        # 50 dual updates x 4 chain steps; ks index dual updates
        assert traj.ks[-1] == 50


class TestProjected:
    def test_interval_projector_clamps(self):
        proj = projector_for(TRUNC1D)
        assert proj(np.array([0.5]))[0] == 1.0
        assert proj(np.array([2.0]))[0] == 2.0
        assert proj(np.array([4.0]))[0] == 3.0

    def test_ball_projector_is_radial(self):
        spec = TruncatedGaussianSpec(mean=[2.0, 2.0],
                                     region=Ball([0.0, 0.0], 1.0))
        proj = projector_for(spec)
        np.testing.assert_allclose(proj(np.array([2.0, 2.0])),
                                   [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-12)
        inside = np.array([0.3, -0.2])
        assert np.array_equal(proj(inside), inside)

    def test_all_iterates_inside_support(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, iterations=5000, seed=4, log_stride=1)
        traj = run_projected_lmc(p, cfg, [0.0], projector_for(TRUNC1D))
        s = p.support[0]
        assert max(s.value(x) for x in traj.xs) <= 1e-9

    def test_broken_projector_trips_assertion(self):
        p = trunc1d()
        cfg = sampler_config(1e-3, iterations=10, seed=4)
        with pytest.raises(AssertionError, match="support"):
            run_projected_lmc(p, cfg, [0.0], lambda x: x + 10.0)


class TestRejection:
    def test_always_feasible_accepts_everything(self):
        g = linear_field(-1.0, [0.0], name="s-vacuous")
        p = Problem(dim=1, f=quadratic_field([0.0]), ineq=(),
                    label="free", support=(g,),
                    direct_sampler=lambda gen, n: gen.standard_normal((n, 1)))
        samples, rate = rejection_sample(p, 500, seed=0)
        assert rate == 1.0
        assert samples.shape == (500, 1)

    def test_truncated_normal_mean(self):
        p = trunc1d()
        samples, rate = rejection_sample(p, 1_000_000, seed=11)
        assert samples.shape[0] == 1_000_000
        assert abs(samples[:, 0].mean() - 1.510) <= 0.01
        assert rate == pytest.approx(0.1573, abs=0.002)

    def test_requires_direct_sampler(self):
        table = synthetic_adult_table(n_rows=50, seed=1)
        p = make_logistic_fairness(LogisticFairnessSpec(table=table))
        with pytest.raises(ConfigurationError):
            rejection_sample(p, 10, seed=0)

    def test_hopeless_constraint_aborts(self):
        s = linear_field(1.0, [0.0], name="impossible")
        p = Problem(dim=1, f=quadratic_field([0.0]), support=(s,),
                    label="never",
                    direct_sampler=lambda gen, n: gen.standard_normal((n, 1)))
        with pytest.raises(NumericError, match="rate"):
            rejection_sample(p, 10, seed=0, max_proposals=100_000)
