"""Built-in problem instances and their ground-truth oracles.

Four families:

- truncated Gaussians (interval in 1D, ball in any dimension) encoded as a
  hinge moment constraint with configurable slack, plus closed-form /
  quadrature moment oracles and support projectors;
- a unit Gaussian with a linear mean constraint, whose multiplier and dual
  objective are known in closed form;
- Bayesian logistic regression with group-parity constraints on the
  prevalence of positive predictions;
- a conjugate Gaussian model of per-asset mean returns with equality
  constraints on the posterior means.

All constructors return immutable :class:`~pdlmc.core.Problem` values whose
analytic gradients are validated against finite differences in the tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .core import (ConfigurationError, DifferentiableField, NumericError,
                   Problem, as_vector, hinge_constraint, linear_field,
                   quadratic_field)


# ---------------------------------------------------------------------------
# truncated Gaussians


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ConfigurationError(f"interval needs a < b, got [{self.a}, {self.b}]")


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        if not self.radius > 0:
            raise ConfigurationError(f"ball radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class TruncatedGaussianSpec:
    """Unit-covariance Gaussian at ``mean`` restricted to ``region``.

    ``slack`` pads the right-hand side of the hinge constraint so a strictly
    feasible distribution exists; it also steadies the multiplier dynamics.
    Only unit isotropic covariance is supported in this release.
    """

    mean: np.ndarray
    region: Interval | Ball
    slack: float = 0.0
    covariance_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", as_vector(self.mean))
        if self.slack < 0:
            raise ConfigurationError(f"slack must be >= 0, got {self.slack}")
        if self.covariance_scale != 1.0:
            raise ConfigurationError(
                "only unit isotropic covariance is supported in this release")
        if isinstance(self.region, Interval) and self.mean.size != 1:
            raise ConfigurationError("interval regions require a 1-D problem")
        if isinstance(self.region, Ball) and self.region.center.size != self.mean.size:
            raise ConfigurationError("ball center and mean dimensions differ")


def _boundary_field(region):
    """The raw boundary function s with {s <= 0} equal to the region."""
    if isinstance(region, Interval):
        a, b = region.a, region.b

        def value(x):
            return (x[0] - a) * (x[0] - b)

        def grad(x):
            return np.array([2.0 * x[0] - (a + b)])

        def batch(rows):
            c = rows[:, 0]
            return (c - a) * (c - b)

        return DifferentiableField(value, grad, name=f"interval[{a},{b}]",
                                   batch_value=batch)
    if isinstance(region, Ball):
        c, r2 = region.center, region.radius ** 2

        def value(x):
            d = x - c
            return float(d @ d) - r2

        def grad(x):
            return 2.0 * (x - c)

        def batch(rows):
            d = rows - c
            return np.einsum("ij,ij->i", d, d) - r2

        return DifferentiableField(value, grad, name=f"ball(r={region.radius})",
                                   batch_value=batch)
    raise ConfigurationError(f"unsupported region {region!r}")


def make_truncated_gaussian(spec):
    """Potential ||x - mean||^2/2 with the single constraint [s(x)]_+ <= slack."""
    s = _boundary_field(spec.region)
    g = hinge_constraint(s, slack=spec.slack)
    mean = spec.mean

    def direct_sampler(gen, n):
        return mean + gen.standard_normal((n, mean.size))

    kind = "interval" if isinstance(spec.region, Interval) else "ball"
    return Problem(dim=mean.size, f=quadratic_field(mean, name="gaussian-potential"),
                   ineq=(g,), label=f"truncated-gaussian-{kind}-{mean.size}d",
                   support=(s,), direct_sampler=direct_sampler)


def projector_for(spec):
    """Euclidean projection onto the spec's region (for the projected baseline)."""
    region = spec.region
    if isinstance(region, Interval):
        a, b = region.a, region.b

        def project(x):
            return np.clip(x, a, b)

        return project
    c, r = region.center, region.radius

    def project(x):
        d = x - c
        norm = float(np.linalg.norm(d))
        if norm <= r:
            return x
        return c + (r / norm) * d

    return project


def truncated_moments_oracle(spec, boundary_width=1e-3):
    """Ground-truth (mean, boundary mass) of the truncated law.

    Intervals use the closed-form truncated-normal mean; balls (2D only)
    use polar quadrature of the restricted Gaussian with relative error
    well below 1e-6.  ``boundary mass`` is the probability within
    ``boundary_width`` of the region boundary under the truncated law.
    """
    region = spec.region
    if isinstance(region, Interval):
        mu = float(spec.mean[0])
        a, b = region.a - mu, region.b - mu
        z = stats.norm.cdf(b) - stats.norm.cdf(a)
        if z <= 0:
            raise ConfigurationError("interval carries no Gaussian mass")
        mean = mu + (stats.norm.pdf(a) - stats.norm.pdf(b)) / z
        w = boundary_width
        near = (stats.norm.cdf(a + w) - stats.norm.cdf(a)
                + stats.norm.cdf(b) - stats.norm.cdf(b - w))
        return np.array([mean]), near / z
    if spec.mean.size != 2:
        raise ConfigurationError("ball moment oracle is implemented for 2-D only")
    c, r = region.center, region.radius
    mu = spec.mean

    def polar(fn, r_lo, r_hi):
        def integrand(rad, theta):
            x = c[0] + rad * math.cos(theta)
            y = c[1] + rad * math.sin(theta)
            w = math.exp(-0.5 * ((x - mu[0]) ** 2 + (y - mu[1]) ** 2))
            return fn(x, y) * w * rad

        val, err = integrate.dblquad(integrand, 0.0, 2.0 * math.pi,
                                     r_lo, r_hi, epsabs=1e-14, epsrel=1e-10)
        if not math.isfinite(val) or err > max(1e-12, 1e-8 * abs(val)):
            raise NumericError(
                f"quadrature did not converge (value {val}, error {err})")
        return val

    z = polar(lambda x, y: 1.0, 0.0, r)
    mean = np.array([polar(lambda x, y: x, 0.0, r) / z,
                     polar(lambda x, y: y, 0.0, r) / z])
    near = polar(lambda x, y: 1.0, r - boundary_width, r) / z
    return mean, near


# ---------------------------------------------------------------------------
# Gaussian with a linear mean constraint


@dataclass(frozen=True)
class GaussianMomentSpec:
    """Unit Gaussian target with the mean pinned to ``b`` via equality constraints."""

    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", as_vector(self.b))

    @property
    def dim(self):
        return self.b.size


def make_gaussian_moment(spec):
    """f = ||x||^2/2 with one equality constraint b_j - x_j per coordinate.

    The constrained target is the unit Gaussian shifted to mean b, and the
    optimal equality multiplier equals b itself; both facts back the oracle
    checks.
    """
    d = spec.dim
    eqs = []
    for j in range(d):
        coef = np.zeros(d)
        coef[j] = -1.0
        eqs.append(linear_field(float(spec.b[j]), coef, name=f"mean-pin[{j}]"))

    def direct_sampler(gen, n):
        return gen.standard_normal((n, d))

    return Problem(dim=d, f=quadratic_field(np.zeros(d), name="gaussian-potential"),
                   eq=tuple(eqs), label=f"gaussian-moment-{d}d",
                   direct_sampler=direct_sampler)


def gaussian_moment_dual(spec):
    """Closed-form dual objective nu -> -||nu||^2/2 + nu.b (concave, maximized at b)."""
    b = spec.b

    def dual(nu):
        nu = as_vector(nu, b.size)
        return -0.5 * float(nu @ nu) + float(nu @ b)

    return dual


def gaussian_moment_multiplier(spec):
    """The optimal equality multiplier: exactly b."""
    return spec.b.copy()


# ---------------------------------------------------------------------------
# labeled tables (fairness data)


@dataclass(frozen=True)
class LabeledTable:
    """Rows of (features incl. intercept, binary label, group name)."""

    features: np.ndarray
    labels: np.ndarray
    group_names: tuple[str, ...]
    row_groups: np.ndarray  # group name per row
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ConfigurationError("features and labels row counts differ")

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def group_indices(self, name):
        return np.flatnonzero(self.row_groups == name)

    def groups(self):
        return {name: self.group_indices(name) for name in self.group_names}


def load_labeled_csv(path):
    """Parse a labeled table: feat_* columns, binary ``label``, string ``group``.

    An intercept column of ones is prepended to the features.  Malformed or
    incomplete rows fail with the 1-based line number; labels other than
    0/1 are rejected.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty file") from None
        feat_cols = [i for i, name in enumerate(header) if name.startswith("feat_")]
        if not feat_cols:
            raise ConfigurationError(f"{path}: no feat_* columns in header")
        try:
            label_col = header.index("label")
            group_col = header.index("group")
        except ValueError as exc:
            raise ConfigurationError(f"{path}: missing column: {exc}") from None
        feats, labels, groups = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ConfigurationError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            try:
                feats.append([float(row[i]) for i in feat_cols])
            except ValueError:
                raise ConfigurationError(
                    f"{path}:{line_no}: malformed feature value") from None
            if row[label_col] not in ("0", "1"):
                raise ConfigurationError(
                    f"{path}:{line_no}: label must be 0 or 1, got {row[label_col]!r}")
            labels.append(int(row[label_col]))
            groups.append(row[group_col])
    if not feats:
        raise ConfigurationError(f"{path}: no data rows")
    features = np.column_stack([np.ones(len(feats)), np.array(feats)])
    names = ("intercept",) + tuple(header[i] for i in feat_cols)
    row_groups = np.array(groups)
    return LabeledTable(features=features, labels=np.array(labels, dtype=np.int64),
                        group_names=tuple(sorted(set(groups))),
                        row_groups=row_groups, feature_names=names)


def write_labeled_csv(table, path):
    """Inverse of :func:`load_labeled_csv` (drops the intercept column)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(table.feature_names[1:]) + ["label", "group"])
        for i in range(table.n_rows):
            row = [format(v, ".17g") for v in table.features[i, 1:]]
            writer.writerow(row + [str(int(table.labels[i])), str(table.row_groups[i])])


# ---------------------------------------------------------------------------
# logistic regression with group-parity constraints


@dataclass(frozen=True)
class LogisticFairnessSpec:
    """Bayesian logistic posterior with one parity constraint per group.

    For each group G, the average predicted positive-probability over G may
    trail the population average by at most ``tolerance``.
    """

    table: LabeledTable
    prior_variance: float = 3.0
    tolerance: float = 0.01
    groups: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.prior_variance > 0:
            raise ConfigurationError("prior_variance must be > 0")
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be > 0")
        groups = self.groups or self.table.group_names
        object.__setattr__(self, "groups", tuple(groups))
        if self.table.n_rows == 0:
            raise ConfigurationError("dataset is empty")
        for name in self.groups:
            if self.table.group_indices(name).size == 0:
                raise ConfigurationError(f"group {name!r} has no rows")


def make_logistic_fairness(spec):
    """Binomial log-likelihood + Gaussian prior potential, parity constraints.

    Potential: sum_n log(1 + exp(-(2 y_n - 1) x_n.theta)) + ||theta||^2 /
    (2 sigma^2).  Constraint per group G:
    mean_n q(x_n) - mean_{n in G} q(x_n) - tolerance <= 0 with
    q(x) = sigmoid(x.theta).  Gradients are analytic; the log-likelihood
    term uses logaddexp for stability at extreme logits.
    """
    X = spec.table.features
    y = spec.table.labels.astype(float)
    signs = 2.0 * y - 1.0
    n, d = X.shape
    sigma2 = spec.prior_variance

    def f_value(theta):
        z = signs * (X @ theta)
        return float(np.logaddexp(0.0, -z).sum() + 0.5 * (theta @ theta) / sigma2)

    def f_grad(theta):
        z = signs * (X @ theta)
        return -(X.T @ (signs * special.expit(-z))) + theta / sigma2

    f = DifferentiableField(f_value, f_grad, name="logistic-posterior-potential")

    ineqs = []
    for name in spec.groups:
        idx = spec.table.group_indices(name)
        weights = np.full(n, 1.0 / n)
        weights[idx] -= 1.0 / idx.size
        delta = spec.tolerance

        def c_value(theta, w=weights, delta=delta):
            return float(w @ special.expit(X @ theta)) - delta

        def c_grad(theta, w=weights):
            q = special.expit(X @ theta)
            return X.T @ (w * q * (1.0 - q))

        ineqs.append(DifferentiableField(c_value, c_grad, name=f"parity[{name}]"))

    return Problem(dim=d, f=f, ineq=tuple(ineqs), label="logistic-fairness")


def positive_rates(table, thetas):
    """Ergodic positive-prediction rates: population and per group.

    ``thetas`` is an (n_samples, d) array of posterior draws; rates are the
    average predicted probability over draws and rows.
    """
    thetas = np.atleast_2d(thetas)
    q = special.expit(table.features @ thetas.T)  # (rows, samples)
    pop = float(q.mean())
    per_group = {name: float(q[table.group_indices(name)].mean())
                 for name in table.group_names}
    return pop, per_group


# ---------------------------------------------------------------------------
# market mean-return model


@dataclass(frozen=True)
class MarketSpec:
    """Gaussian posterior over per-asset mean log-returns, means pinned to targets.

    The likelihood covariance is fixed at the per-asset sample variance of
    the series (diagonal); only the mean vector is a sampled parameter.
    Variance caps are not representable in this mean-only parametrization
    and are rejected.
    """

    return_series: np.ndarray
    target_means: np.ndarray
    prior_variance: float = 3.0
    asset_names: tuple[str, ...] = ()
    variance_caps: np.ndarray | None = None

    def __post_init__(self):
        series = np.asarray(self.return_series, dtype=float)
        if series.ndim != 2 or series.shape[0] < 2:
            raise ConfigurationError("return series needs >= 2 rows of per-asset returns")
        object.__setattr__(self, "return_series", series)
        object.__setattr__(self, "target_means", as_vector(self.target_means,
                                                           series.shape[1]))
        if not self.prior_variance > 0:
            raise ConfigurationError("prior_variance must be > 0")
        if self.variance_caps is not None:
            raise ConfigurationError(
                "variance caps are not representable: the covariance is a "
                "fixed constant here, not a sampled parameter")
        if not self.asset_names:
            object.__setattr__(self, "asset_names", tuple(
                f"asset{i}" for i in range(series.shape[1])))
        if np.any(series.var(axis=0, ddof=1) <= 0):
            raise ConfigurationError("degenerate return series: an asset has zero variance")

    @property
    def num_assets(self):
        return self.return_series.shape[1]


def make_market(spec):
    """Negative log-posterior of the mean returns, one equality pin per asset."""
    series = spec.return_series
    t_obs, n_assets = series.shape
    rbar = series.mean(axis=0)
    var = series.var(axis=0, ddof=1)
    prior_prec = 1.0 / spec.prior_variance
    like_prec = t_obs / var

    def f_value(rho):
        d = rho - rbar
        return float(0.5 * (like_prec @ (d * d)) + 0.5 * prior_prec * (rho @ rho))

    def f_grad(rho):
        return like_prec * (rho - rbar) + prior_prec * rho

    f = DifferentiableField(f_value, f_grad, name="market-posterior-potential")
    eqs = []
    for i in range(n_assets):
        coef = np.zeros(n_assets)
        coef[i] = -1.0
        eqs.append(linear_field(float(spec.target_means[i]), coef,
                                name=f"mean-return[{spec.asset_names[i]}]"))
    return Problem(dim=n_assets, f=f, eq=tuple(eqs), label="market")


def market_posterior_moments(spec):
    """Closed-form posterior mean and variance of the conjugate model."""
    series = spec.return_series
    t_obs = series.shape[0]
    rbar = series.mean(axis=0)
    var = series.var(axis=0, ddof=1)
    prec = t_obs / var + 1.0 / spec.prior_variance
    mean = (t_obs * rbar / var) / prec
    return mean, 1.0 / prec


def market_multiplier_oracle(spec):
    """Exact equality multipliers: posterior precision times (target - mean)."""
    mean, post_var = market_posterior_moments(spec)
    return (spec.target_means - mean) / post_var
