"""Sampling algorithms with a uniform trajectory-logging contract.

Six runners share the same primitives and noise stream:

- ``run_lmc``: unadjusted Langevin on the bare potential.
- ``run_pdlmc``: interleaved Langevin step on the tilted potential and
  projected subgradient ascent on the duals, one sample per dual update.
  The dual updates consume the constraint values at the pre-update sample.
- ``run_dual_ascent_minibatch``: same, but the chain advances ``minibatch``
  Langevin steps per dual update and the dual step uses the average
  constraint value over those samples.
- ``run_dlmc``: two-timescale variant; each outer iteration burns the chain
  in at frozen multipliers before one dual update.  Inequality constraints
  only.
- ``run_projected_lmc``: baseline that projects every iterate back onto the
  support set.
- ``rejection_sample``: ground-truth sampler for Gaussian targets with
  support constraints.

Every runner is a pure function of (problem, config, x0): rerunning with
identical inputs reproduces the trajectory exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterator

import numpy as np

from .core import (ConfigurationError, DualState, NumericError, Problem,
                   _u_grad_arrays, all_finite, as_vector, diagnose_nonfinite,
                   project_nonneg)
from .rng import NoiseStream, proposal_generator


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class StepSchedule:
    """Step size as a function of the iteration index.

    ``constant`` returns ``base`` forever; ``inverse-sqrt`` returns
    ``base / sqrt(k + 1)``, the diminishing schedule used by the sublinear
    ergodic guarantees.
    """

    kind: str
    base: float

    def __post_init__(self):
        if self.kind not in ("constant", "inverse-sqrt"):
            raise ConfigurationError(f"unknown step schedule kind {self.kind!r}")
        if not (self.base > 0 and math.isfinite(self.base)):
            raise ConfigurationError(f"step schedule base must be > 0, got {self.base}")

    def step(self, k):
        if self.kind == "constant":
            return self.base
        return self.base / math.sqrt(k + 1.0)


def constant(base):
    return StepSchedule("constant", base)


def inverse_sqrt(base):
    return StepSchedule("inverse-sqrt", base)


def _as_schedule(value):
    if isinstance(value, StepSchedule):
        return value
    return constant(float(value))


@dataclass(frozen=True)
class SamplerConfig:
    """Shared knob set for all runners.

    ``iterations`` counts primal steps for lmc/pdlmc/projected-lmc, dual
    updates for the minibatch runner, and outer iterations for dlmc.
    ``minibatch`` and the ``dlmc_*`` fields are ignored by runners that do
    not use them.  ``dual_cap`` bounds ``max |lam|, |nu|``; crossing it
    aborts the run, since runaway multipliers invalidate every downstream
    statistic.
    """

    eta_x: StepSchedule
    eta_lambda: StepSchedule
    eta_nu: StepSchedule
    iterations: int
    burn_in_fraction: float = 0.5
    minibatch: int = 1
    dlmc_inner: int = 1
    dlmc_gamma: float = 1e-3
    dlmc_warm_start: bool = True
    seed: int = 0
    log_stride: int = 1
    dual_cap: float = 1e4

    def __post_init__(self):
        object.__setattr__(self, "eta_x", _as_schedule(self.eta_x))
        object.__setattr__(self, "eta_lambda", _as_schedule(self.eta_lambda))
        object.__setattr__(self, "eta_nu", _as_schedule(self.eta_nu))
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ConfigurationError("burn_in_fraction must lie in [0, 1)")
        if self.minibatch < 1:
            raise ConfigurationError("minibatch must be >= 1")
        if self.dlmc_inner < 1:
            raise ConfigurationError("dlmc_inner must be >= 1")
        if not self.dlmc_gamma > 0:
            raise ConfigurationError("dlmc_gamma must be > 0")
        if self.log_stride < 1:
            raise ConfigurationError("log_stride must be >= 1")
        if not self.dual_cap > 0:
            raise ConfigurationError("dual_cap must be > 0")


def sampler_config(eta_x, eta_lambda=None, eta_nu=None, iterations=1000, **kw):
    """Convenience constructor accepting plain floats for the schedules."""
    eta_x = _as_schedule(eta_x)
    eta_lambda = eta_x if eta_lambda is None else _as_schedule(eta_lambda)
    eta_nu = eta_lambda if eta_nu is None else _as_schedule(eta_nu)
    return SamplerConfig(eta_x=eta_x, eta_lambda=eta_lambda, eta_nu=eta_nu,
                         iterations=iterations, **kw)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class TrajectoryRecord:
    """One logged iteration: sample, duals, and constraint values at that sample."""

    k: int
    x: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    g_of_x: np.ndarray
    h_of_x: np.ndarray


@dataclass
class Trajectory:
    """Columnar log of a run; one row per logged iteration.

    Rows cover iteration 0, every ``log_stride``-th iteration, and always
    the final one, in strictly increasing order of ``ks``.  The constraint
    columns hold g and h evaluated at exactly the logged sample.
    """

    ks: np.ndarray
    xs: np.ndarray
    lams: np.ndarray
    nus: np.ndarray
    gs: np.ndarray
    hs: np.ndarray
    config_echo: SamplerConfig
    problem_label: str
    sampler: str

    def __len__(self):
        return self.ks.shape[0]

    def records(self) -> Iterator[TrajectoryRecord]:
        for i in range(len(self)):
            yield TrajectoryRecord(int(self.ks[i]), self.xs[i], self.lams[i],
                                   self.nus[i], self.gs[i], self.hs[i])

    def kept_slice(self, burn_in_fraction=None):
        """Index of the first record kept after discarding the burn-in."""
        frac = self.config_echo.burn_in_fraction if burn_in_fraction is None \
            else burn_in_fraction
        start = int(frac * len(self))
        if start >= len(self):
            raise ConfigurationError("burn-in discards every logged record")
        return start


class _TrajectoryLog:
    """Preallocated columnar writer for the runners."""

    def __init__(self, problem, cfg, total_iters, sampler):
        stride = cfg.log_stride
        ks = list(range(0, total_iters + 1, stride))
        if ks[-1] != total_iters:
            ks.append(total_iters)
        self._want = set(ks)
        n = len(ks)
        self.problem = problem
        self.cfg = cfg
        self.sampler = sampler
        self.ks = np.array(ks, dtype=np.int64)
        self.xs = np.empty((n, problem.dim))
        self.lams = np.empty((n, problem.n_ineq))
        self.nus = np.empty((n, problem.n_eq))
        self.gs = np.empty((n, problem.n_ineq))
        self.hs = np.empty((n, problem.n_eq))
        self._next = 0

    def wants(self, k):
        return k in self._want

    def log(self, k, x, lam, nu):
        i = self._next
        self.xs[i] = x
        self.lams[i] = lam
        self.nus[i] = nu
        self.gs[i] = self.problem.ineq_values(x)
        self.hs[i] = self.problem.eq_values(x)
        self._next += 1

    def finish(self):
        assert self._next == self.ks.shape[0]
        return Trajectory(self.ks, self.xs, self.lams, self.nus, self.gs,
                          self.hs, self.cfg, self.problem.label, self.sampler)


# ---------------------------------------------------------------------------
# primitives


def lmc_step(x, grad, eta, noise):
    """One unadjusted Langevin update: x - eta*grad + sqrt(2*eta)*noise."""
    return x - eta * grad + math.sqrt(2.0 * eta) * noise


def _check_iterate(x, k, problem, x_prev, lam, nu):
    if not all_finite(x):
        diagnose_nonfinite(problem, x_prev, lam, nu)
        raise NumericError(
            f"non-finite iterate at iteration {k} on problem "
            f"{problem.label!r}: {x}")
    return x


def _beyond(vec, cap):
    n = vec.shape[0]
    if n <= 4:
        for i in range(n):
            v = vec[i]
            if v > cap or v < -cap:
                return True
        return False
    return bool((np.abs(vec) > cap).any())


def _nonneg(vec):
    n = vec.shape[0]
    if n <= 4:
        for i in range(n):
            if vec[i] < 0.0:
                return False
        return True
    return bool((vec >= 0.0).all())


# dual iterates move by at most one bounded increment per iteration, so a
# stride-128 cap check still catches divergence promptly and cheaply
_CAP_STRIDE = 128


def _check_dual_cap(lam, nu, cap, k, label):
    if _beyond(lam, cap) or _beyond(nu, cap):
        raise NumericError(
            f"dual iterate exceeded cap {cap:g} by iteration {k} on problem "
            f"{label!r} (lam={lam}, nu={nu}); the run is diverging")


def _start(problem, cfg, x0, sampler, total_iters=None):
    x = as_vector(x0, problem.dim).copy()
    total = cfg.iterations if total_iters is None else total_iters
    log = _TrajectoryLog(problem, cfg, total, sampler)
    noise = NoiseStream(cfg.seed, problem.dim)
    return x, log, noise


# ---------------------------------------------------------------------------
# runners


def run_lmc(problem, cfg, x0):
    """Unadjusted Langevin Monte Carlo on the bare potential.

    Constraints, if any, do not influence the dynamics; they are still
    evaluated at logged samples so baselines report the same diagnostics.
    """
    x, log, noise = _start(problem, cfg, x0, "lmc")
    lam = np.zeros(problem.n_ineq)
    nu = np.zeros(problem.n_eq)
    log.log(0, x, lam, nu)
    fgrad = problem.f.grad
    eta_x = cfg.eta_x.step
    for k in range(cfg.iterations):
        x_prev = x
        x = lmc_step(x, fgrad(x), eta_x(k), noise.take())
        _check_iterate(x, k + 1, problem, x_prev, lam, nu)
        if log.wants(k + 1):
            log.log(k + 1, x, lam, nu)
    return log.finish()


def run_pdlmc(problem, cfg, x0):
    """Primal-dual Langevin: simultaneous sample and multiplier updates.

    Per iteration k: the sample moves one Langevin step against the tilted
    potential at the current duals; the inequality multipliers take one
    projected ascent step and the equality multipliers one plain ascent
    step, both fed by the constraint values at the pre-update sample x_k.
    Duals start at zero.
    """
    x, log, noise = _start(problem, cfg, x0, "pdlmc")
    I, J = problem.n_ineq, problem.n_eq
    lam = np.zeros(I)
    nu = np.zeros(J)
    log.log(0, x, lam, nu)
    eta_x, eta_l, eta_n = cfg.eta_x.step, cfg.eta_lambda.step, cfg.eta_nu.step
    ineq_values, eq_values = problem.ineq_values, problem.eq_values
    take, wants = noise.take, log.wants
    total, cap = cfg.iterations, cfg.dual_cap
    for k in range(total):
        gx = ineq_values(x) if I else None
        hx = eq_values(x) if J else None
        grad = _u_grad_arrays(problem, x, lam, nu)
        x_prev = x
        x = lmc_step(x, grad, eta_x(k), take())
        _check_iterate(x, k + 1, problem, x_prev, lam, nu)
        if I:
            lam = project_nonneg(lam + eta_l(k) * gx)
            assert _nonneg(lam), "projection left a negative multiplier"
        if J:
            nu = nu + eta_n(k) * hx
        if (I or J) and (k % _CAP_STRIDE == 0 or k + 1 == total):
            _check_dual_cap(lam, nu, cap, k + 1, problem.label)
        if wants(k + 1):
            log.log(k + 1, x, lam, nu)
    return log.finish()


def run_dual_ascent_minibatch(problem, cfg, x0):
    """Dual ascent with averaged constraint estimates.

    The chain advances ``cfg.minibatch`` Langevin steps per dual update and
    the dual step consumes the mean of g (and h) over the pre-step samples
    it visited.  ``cfg.iterations`` counts dual updates; one record is
    logged per dual update.  With ``minibatch=1`` this is exactly the
    primal-dual runner.
    """
    nb = cfg.minibatch
    x, log, noise = _start(problem, cfg, x0, "dual-ascent-minibatch")
    I, J = problem.n_ineq, problem.n_eq
    lam = np.zeros(I)
    nu = np.zeros(J)
    log.log(0, x, lam, nu)
    eta_x, eta_l, eta_n = cfg.eta_x.step, cfg.eta_lambda.step, cfg.eta_nu.step
    t = 0
    for k in range(cfg.iterations):
        gsum = np.zeros(I)
        hsum = np.zeros(J)
        for _ in range(nb):
            if I:
                gsum += problem.ineq_values(x)
            if J:
                hsum += problem.eq_values(x)
            grad = _u_grad_arrays(problem, x, lam, nu)
            x_prev = x
            x = lmc_step(x, grad, eta_x(t), noise.take())
            t += 1
            _check_iterate(x, t, problem, x_prev, lam, nu)
        if I:
            lam = project_nonneg(lam + eta_l(k) * (gsum / nb))
        if J:
            nu = nu + eta_n(k) * (hsum / nb)
        if (I or J) and (k % _CAP_STRIDE == 0 or k + 1 == cfg.iterations):
            _check_dual_cap(lam, nu, cfg.dual_cap, k + 1, problem.label)
        if log.wants(k + 1):
            log.log(k + 1, x, lam, nu)
    return log.finish()


def run_dlmc(problem, cfg, x0):
    """Two-timescale dual Langevin for inequality-only problems.

    Each outer iteration burns the chain in with ``cfg.dlmc_inner`` Langevin
    steps at step size ``cfg.dlmc_gamma`` and frozen multipliers, then takes
    one projected dual step.  The dual step consumes g at the sample from
    which the last inner step departed, so the measurement and the step are
    simultaneous; with one inner step and a warm start this reduces exactly
    to the primal-dual runner.  With ``dlmc_warm_start=False`` the chain
    restarts from the supplied x0 at every outer iteration, reproducing the
    cold-start description literally (the restart consumes no randomness).
    ``cfg.iterations`` counts outer iterations.
    """
    if problem.n_eq:
        raise ConfigurationError(
            "dlmc supports inequality constraints only; equality-constrained "
            f"problem {problem.label!r} has J={problem.n_eq}")
    n0 = cfg.dlmc_inner
    gamma = cfg.dlmc_gamma
    x, log, noise = _start(problem, cfg, x0, "dlmc")
    x0_arr = as_vector(x0, problem.dim).copy()
    I = problem.n_ineq
    lam = np.zeros(I)
    nu = np.zeros(0)
    log.log(0, x, lam, nu)
    eta_l = cfg.eta_lambda.step
    for k in range(cfg.iterations):
        if not cfg.dlmc_warm_start:
            x = x0_arr.copy()
        gx = None
        for n in range(n0):
            if n == n0 - 1 and I:
                gx = problem.ineq_values(x)
            grad = _u_grad_arrays(problem, x, lam, nu)
            x_prev = x
            x = lmc_step(x, grad, gamma, noise.take())
            _check_iterate(x, k + 1, problem, x_prev, lam, nu)
        if I:
            lam = project_nonneg(lam + eta_l(k) * gx)
            _check_dual_cap(lam, nu, cfg.dual_cap, k + 1, problem.label)
        if log.wants(k + 1):
            log.log(k + 1, x, lam, nu)
    return log.finish()


def run_projected_lmc(problem, cfg, x0, projector):
    """Langevin with projection of every iterate onto the support set.

    ``projector`` must map into {s_i <= 0}; outputs violating the support
    fields by more than 1e-9 indicate a broken projector and trip an
    assertion.
    """
    x, log, noise = _start(problem, cfg, x0, "projected-lmc")
    lam = np.zeros(problem.n_ineq)
    nu = np.zeros(problem.n_eq)
    x = _projected(projector, x, problem)
    log.log(0, x, lam, nu)
    fgrad = problem.f.grad
    eta_x = cfg.eta_x.step
    for k in range(cfg.iterations):
        x_prev = x
        x = lmc_step(x, fgrad(x), eta_x(k), noise.take())
        x = _projected(projector, x, problem)
        _check_iterate(x, k + 1, problem, x_prev, lam, nu)
        if log.wants(k + 1):
            log.log(k + 1, x, lam, nu)
    return log.finish()


def _projected(projector, x, problem):
    y = projector(x)
    for s in problem.support:
        v = s.value(y)
        assert v <= 1e-9, (
            f"projector left the support set: {s.name}={v:g} at {y}")
    return y


def rejection_sample(problem, n, seed, max_proposals=10**7, min_rate=1e-6):
    """Exact samples from the support-constrained target, plus acceptance rate.

    Draws proposals from the problem's direct sampler for the unconstrained
    target and keeps those inside the support set {s_i <= 0} until n are
    accepted.  Aborts when the empirical acceptance rate is still below
    ``min_rate`` after ``max_proposals`` proposals.
    """
    if problem.direct_sampler is None:
        raise ConfigurationError(
            f"problem {problem.label!r} has no direct sampler for its target")
    if not problem.support:
        raise ConfigurationError(
            f"problem {problem.label!r} has no support fields to reject against")
    if n < 1:
        raise ConfigurationError("need n >= 1 samples")
    gen = proposal_generator(seed)
    chunk = max(1024, min(n, 65536))
    accepted = []
    n_acc = 0
    n_prop = 0
    while n_acc < n:
        rows = problem.direct_sampler(gen, chunk)
        mask = np.ones(rows.shape[0], dtype=bool)
        for s in problem.support:
            mask &= s.values_at(rows) <= 0.0
        need = n - n_acc
        idx = np.flatnonzero(mask)
        if idx.size >= need:
            # count proposals only up to the one delivering the n-th acceptance
            n_prop += int(idx[need - 1]) + 1
            accepted.append(rows[idx[:need]])
            n_acc = n
            break
        n_prop += rows.shape[0]
        if idx.size:
            accepted.append(rows[idx])
            n_acc += idx.size
        if n_prop >= max_proposals and n_acc < min_rate * n_prop:
            raise NumericError(
                f"rejection sampling on {problem.label!r} accepted {n_acc} of "
                f"{n_prop} proposals (rate < {min_rate:g}); giving up")
    samples = np.concatenate(accepted, axis=0)
    return samples, n_acc / n_prop


def rejection_trajectory(problem, cfg, seed=None):
    """Package rejection samples in the common trajectory format.

    Duals are identically zero and ``ks`` just indexes the samples; this
    lets the comparison and histogram tooling treat ground truth uniformly.
    """
    n = cfg.iterations
    samples, rate = rejection_sample(problem, n, cfg.seed if seed is None else seed)
    I, J = problem.n_ineq, problem.n_eq
    gs = np.column_stack([g.values_at(samples) for g in problem.ineq]) \
        if I else np.empty((n, 0))
    hs = np.column_stack([h.values_at(samples) for h in problem.eq]) \
        if J else np.empty((n, 0))
    traj = Trajectory(np.arange(n, dtype=np.int64), samples,
                      np.zeros((n, I)), np.zeros((n, J)), gs, hs,
                      replace(cfg, burn_in_fraction=0.0), problem.label,
                      "rejection")
    return traj, rate
