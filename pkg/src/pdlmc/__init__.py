"""Constrained sampling with primal-dual Langevin Monte Carlo."""

from .core import (ChainState, ConfigurationError, DifferentiableField,
                   DualState, NumericError, Problem, finite_diff_grad,
                   hinge_constraint, project_nonneg, u_grad, u_value)
from .samplers import (SamplerConfig, StepSchedule, Trajectory,
                       TrajectoryRecord, constant, inverse_sqrt, lmc_step,
                       rejection_sample, run_dlmc, run_dual_ascent_minibatch,
                       run_lmc, run_pdlmc, run_projected_lmc, sampler_config)
from .problems import (Ball, GaussianMomentSpec, Interval, LabeledTable,
                       LogisticFairnessSpec, MarketSpec,
                       TruncatedGaussianSpec, load_labeled_csv,
                       make_gaussian_moment, make_logistic_fairness,
                       make_market, make_truncated_gaussian, projector_for,
                       truncated_moments_oracle)
from .diagnostics import (DualReadout, ErgodicReport, FeasibilityReport,
                          dual_readout, ergodic_average, feasibility_report,
                          gaussian_kl, w2_1d)

__version__ = "0.1.0"
