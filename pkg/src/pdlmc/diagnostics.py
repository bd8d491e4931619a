"""Post-hoc statistics over trajectories.

Everything here is a pure function of an immutable trajectory: weighted
ergodic averages, constraint feasibility readouts, the closed-form KL
between unit-covariance Gaussians, an empirical one-dimensional
Wasserstein-2 distance, and a multiplier report with a sensitivity reading
per constraint.  Burn-in means discarding the first fraction of logged
records; samplers log everything and never discard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, as_vector


@dataclass(frozen=True)
class ErgodicReport:
    phi_label: str
    ergodic_value: float | np.ndarray
    window: tuple[int, int]
    weights: str


@dataclass(frozen=True)
class FeasibilityReport:
    """Ergodic constraint slacks over the kept window.

    ``ineq_slack[i]`` is the ergodic mean of g_i (nonpositive means the
    ergodic distribution satisfies constraint i); ``eq_gap[j]`` is the
    absolute ergodic mean of h_j.  ``max_slack`` is the worst of all of
    them; ``outside_fraction`` (support problems only, else None) is the
    fraction of kept samples strictly outside the support set.
    """

    ineq_slack: np.ndarray
    eq_gap: np.ndarray
    max_slack: float | None
    outside_fraction: float | None


@dataclass(frozen=True)
class DualReadout:
    final_lam: np.ndarray
    final_nu: np.ndarray
    ergodic_lam: np.ndarray
    ergodic_nu: np.ndarray
    active_set: tuple[int, ...]
    notes: tuple[str, ...]


def _weights_for(traj, kept_ks, weights):
    if weights == "uniform":
        w = np.full(kept_ks.size, 1.0 / kept_ks.size)
    elif weights == "step-size-proportional":
        raw = np.array([traj.config_echo.eta_x.step(int(k)) for k in kept_ks])
        w = raw / raw.sum()
    else:
        raise ConfigurationError(f"unknown weighting {weights!r}")
    return w


def ergodic_average(traj, phi, burn_in_fraction=None, weights="uniform",
                    phi_label="phi"):
    """Weighted average of ``phi(record)`` over the kept records.

    ``weights='uniform'`` gives the plain ergodic mean; the step-size
    proportional variant weights record k by the primal step size at k.
    """
    start = traj.kept_slice(burn_in_fraction)
    kept_ks = traj.ks[start:]
    w = _weights_for(traj, kept_ks, weights)
    total = None
    i = 0
    for rec in traj.records():
        if rec.k < kept_ks[0]:
            continue
        contrib = w[i] * np.asarray(phi(rec), dtype=float)
        total = contrib if total is None else total + contrib
        i += 1
    value = float(total) if total.ndim == 0 else total
    return ErgodicReport(phi_label=phi_label, ergodic_value=value,
                         window=(int(kept_ks[0]), int(kept_ks[-1])),
                         weights=weights)


def ergodic_mean_x(traj, burn_in_fraction=None, weights="uniform"):
    """Columnar ergodic mean of the samples (fast path for summaries)."""
    start = traj.kept_slice(burn_in_fraction)
    w = _weights_for(traj, traj.ks[start:], weights)
    return w @ traj.xs[start:]


def ergodic_mean_duals(traj, burn_in_fraction=None):
    start = traj.kept_slice(burn_in_fraction)
    n = len(traj) - start
    return traj.lams[start:].sum(axis=0) / n, traj.nus[start:].sum(axis=0) / n


def feasibility_report(traj, problem, burn_in_fraction=None):
    start = traj.kept_slice(burn_in_fraction)
    n = len(traj) - start
    ineq = traj.gs[start:].sum(axis=0) / n if problem.n_ineq else np.zeros(0)
    eq = np.abs(traj.hs[start:].sum(axis=0) / n) if problem.n_eq else np.zeros(0)
    worst = None
    if ineq.size or eq.size:
        worst = float(max(ineq.max(initial=-np.inf), eq.max(initial=-np.inf)))
    outside = None
    if problem.support:
        xs = traj.xs[start:]
        bad = np.zeros(xs.shape[0], dtype=bool)
        for s in problem.support:
            bad |= s.values_at(xs) > 0.0
        outside = float(bad.mean())
    return FeasibilityReport(ineq_slack=ineq, eq_gap=eq, max_slack=worst,
                             outside_fraction=outside)


def prefix_ergodic_slack(traj, k_max):
    """Per-constraint mean of g over logged iterations 1..k_max (no burn-in).

    This is the running feasibility curve the sublinear guarantees speak
    about; it must decay as the window grows.
    """
    mask = (traj.ks >= 1) & (traj.ks <= k_max)
    if not mask.any():
        raise ConfigurationError(f"no logged records in iterations 1..{k_max}")
    return traj.gs[mask].mean(axis=0)


def gaussian_kl(mean1, mean2):
    """KL divergence between unit-covariance Gaussians: ||m1 - m2||^2 / 2."""
    m1 = as_vector(mean1)
    m2 = as_vector(mean2, m1.size)
    d = m1 - m2
    return 0.5 * float(d @ d)


def w2_1d(samples_a, samples_b):
    """Empirical Wasserstein-2 between two 1-D samples via quantile coupling.

    With equal counts this is the root-mean-square difference of order
    statistics (the exact W2 between the empirical measures); unequal
    counts are aligned by evenly spaced order statistics of the larger set.
    """
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ConfigurationError("w2_1d needs nonempty sample sets")
    n = min(a.size, b.size)
    if a.size != n:
        a = a[_even_indices(a.size, n)]
    if b.size != n:
        b = b[_even_indices(b.size, n)]
    return float(np.sqrt(np.mean((a - b) ** 2)))


def _even_indices(size, n):
    return np.minimum((np.arange(n) + 0.5) * (size / n), size - 1).astype(np.int64)


def dual_readout(traj, activity_threshold=None, burn_in_fraction=None):
    """Final and ergodic multipliers, the active set, and sensitivity notes.

    A constraint is called active when its ergodic multiplier exceeds the
    activity threshold (default: 1e-3 times max(1, largest ergodic
    multiplier)); multipliers measure how hard each requirement fights the
    unconstrained target.
    """
    erg_lam, erg_nu = ergodic_mean_duals(traj, burn_in_fraction)
    final_lam = traj.lams[-1]
    final_nu = traj.nus[-1]
    if activity_threshold is None:
        top = float(np.abs(erg_lam).max()) if erg_lam.size else 0.0
        activity_threshold = 1e-3 * max(1.0, top)
    active = tuple(int(i) for i in np.flatnonzero(erg_lam > activity_threshold))
    notes = []
    for i, lam_i in enumerate(erg_lam):
        if i in active:
            notes.append(
                f"inequality {i}: active, price {lam_i:.4g}; tightening the "
                f"bound by u raises the optimal divergence by about {lam_i:.4g}*u")
        else:
            notes.append(
                f"inequality {i}: inactive (price {lam_i:.3g}); the target "
                f"already meets this requirement")
    for j, nu_j in enumerate(erg_nu):
        if nu_j > activity_threshold:
            direction = "above"
        elif nu_j < -activity_threshold:
            direction = "below"
        else:
            notes.append(
                f"equality {j}: price {nu_j:.3g} is negligible; this pin is "
                f"carried by the target (or the other constraints) for free")
            continue
        notes.append(
            f"equality {j}: price {nu_j:.4g}; the pinned value sits {direction} "
            f"what the target would deliver, and moving it costs divergence at "
            f"about |{nu_j:.4g}| per unit")
    return DualReadout(final_lam=final_lam, final_nu=final_nu,
                       ergodic_lam=erg_lam, ergodic_nu=erg_nu,
                       active_set=active, notes=tuple(notes))
