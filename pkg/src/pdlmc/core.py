"""Domain types for constrained sampling problems.

A sampling target is described by a potential ``f`` (the target density is
proportional to ``exp(-f)``), a list of inequality constraint functions
``g_i`` whose expectations must be nonpositive, and a list of equality
constraint functions ``h_j`` whose expectations must vanish.  Dual variables
price the constraints: ``lam[i] >= 0`` for inequalities, ``nu[j]`` free for
equalities.  The tilted potential

    U(x, lam, nu) = f(x) + sum_i lam[i] * g_i(x) + sum_j nu[j] * h_j(x)

is what the samplers descend; ``u_value`` / ``u_grad`` evaluate it and its
(sub)gradient.

Every function here is a pure function of its inputs.  Non-finite values are
treated as bugs and raise :class:`NumericError` immediately rather than
propagating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Invalid problem or run configuration (caught before any sampling)."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where a finite one is guaranteed."""


def as_vector(values, dim=None):
    """Coerce ``values`` to a 1-D float64 array and verify finiteness.

    Raises ``ConfigurationError`` on a dimension mismatch and
    ``NumericError`` if any entry is NaN or infinite.
    """
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if v.ndim != 1:
        raise ConfigurationError(f"expected a 1-D vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ConfigurationError(f"expected dimension {dim}, got {v.shape[0]}")
    if not np.isfinite(v).all():
        raise NumericError(f"non-finite entries in vector: {v}")
    return v


def _check_finite_scalar(value, what):
    if not math.isfinite(value):
        raise NumericError(f"{what} returned non-finite value {value!r}")
    return value


def _check_finite_vector(vec, what):
    if not all_finite(vec):
        raise NumericError(f"{what} returned non-finite gradient {vec!r}")
    return vec


def all_finite(vec):
    """Finiteness test sized for the tiny vectors the chain loops touch."""
    n = vec.shape[0]
    if n <= 4:
        for i in range(n):
            if not math.isfinite(vec[i]):
                return False
        return True
    return bool(np.isfinite(vec).all())


@dataclass(frozen=True)
class DifferentiableField:
    """A scalar field on R^d with an explicit (sub)gradient selection.

    ``value`` maps a length-d array to a float; ``grad`` maps it to a
    length-d array.  Where the field is non-smooth, ``grad`` must return a
    fixed element of the subdifferential so that runs are reproducible.
    ``batch_value``, when provided, evaluates ``value`` on an (n, d) array
    of rows at once; it is an optimization used by rejection sampling and
    diagnostics, never by the chain updates themselves.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    name: str = "field"
    batch_value: Callable[[np.ndarray], np.ndarray] | None = None

    def value_checked(self, x):
        return _check_finite_scalar(float(self.value(x)), self.name)

    def grad_checked(self, x):
        return _check_finite_vector(np.asarray(self.grad(x), dtype=float), self.name)

    def values_at(self, rows):
        """Evaluate on an (n, d) array of rows, vectorized when possible."""
        rows = np.asarray(rows, dtype=float)
        if self.batch_value is not None:
            return np.asarray(self.batch_value(rows), dtype=float)
        return np.array([self.value(r) for r in rows], dtype=float)


@dataclass(frozen=True)
class Problem:
    """A constrained sampling target.

    ``f`` is the potential of the unconstrained target, ``ineq`` the list of
    inequality constraint fields g_i, ``eq`` the list of equality constraint
    fields h_j.  ``support`` optionally holds the raw boundary functions s_i
    for support problems (the set {s_i <= 0}); it backs rejection sampling,
    projection checks and outside-fraction diagnostics.  ``direct_sampler``,
    when present, draws n exact samples from the unconstrained target given
    a ``numpy.random.Generator``.
    """

    dim: int
    f: DifferentiableField
    ineq: tuple[DifferentiableField, ...] = ()
    eq: tuple[DifferentiableField, ...] = ()
    label: str = "problem"
    support: tuple[DifferentiableField, ...] = ()
    direct_sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError(f"problem dimension must be >= 1, got {self.dim}")
        object.__setattr__(self, "ineq", tuple(self.ineq))
        object.__setattr__(self, "eq", tuple(self.eq))
        object.__setattr__(self, "support", tuple(self.support))

    @property
    def n_ineq(self):
        return len(self.ineq)

    @property
    def n_eq(self):
        return len(self.eq)

    def ineq_values(self, x):
        """g(x) as a length-I array (empty array when unconstrained)."""
        vals = np.array([gi.value(x) for gi in self.ineq], dtype=float)
        if not all_finite(vals):
            self._raise_nonfinite(self.ineq, vals, x)
        return vals

    def eq_values(self, x):
        """h(x) as a length-J array."""
        vals = np.array([hj.value(x) for hj in self.eq], dtype=float)
        if not all_finite(vals):
            self._raise_nonfinite(self.eq, vals, x)
        return vals

    @staticmethod
    def _raise_nonfinite(fields, vals, x):
        for fld, val in zip(fields, vals):
            if not math.isfinite(val):
                raise NumericError(
                    f"field {fld.name!r} returned non-finite value {val!r} at x={x}")


@dataclass(frozen=True)
class DualState:
    """Dual iterate (lam, nu); lam is elementwise nonnegative, always."""

    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nu: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "lam", as_vector(self.lam) if np.size(self.lam) else np.zeros(0))
        object.__setattr__(self, "nu", as_vector(self.nu) if np.size(self.nu) else np.zeros(0))
        if self.lam.size and self.lam.min() < 0:
            raise ConfigurationError(f"inequality multipliers must be >= 0, got {self.lam}")

    @staticmethod
    def zeros(problem):
        return DualState(np.zeros(problem.n_ineq), np.zeros(problem.n_eq))


@dataclass
class ChainState:
    """Loop state of a single chain: sample, duals, iteration, stream position.

    Advancing a chain is a pure function of (state, config): the noise
    consumed at each step is addressed by ``noise_position`` alone.
    """

    x: np.ndarray
    dual: DualState
    k: int = 0
    noise_position: int = 0


def u_value(problem, x, dual):
    """Tilted potential f(x) + lam.g(x) + nu.h(x).

    Zero multipliers contribute exactly zero, so ``u_value(p, x, zeros)``
    equals ``f(x)`` exactly.
    """
    x = as_vector(x, problem.dim)
    lam, nu = _dual_arrays(problem, dual)
    total = problem.f.value_checked(x)
    for lam_i, gi in zip(lam, problem.ineq):
        total += lam_i * gi.value_checked(x)
    for nu_j, hj in zip(nu, problem.eq):
        total += nu_j * hj.value_checked(x)
    return _check_finite_scalar(total, f"U on {problem.label}")


def u_grad(problem, x, dual):
    """Gradient of the tilted potential, using each field's subgradient selection."""
    x = as_vector(x, problem.dim)
    lam, nu = _dual_arrays(problem, dual)
    grad = _u_grad_arrays(problem, x, lam, nu)
    if not all_finite(grad):
        diagnose_nonfinite(problem, x, lam, nu)
        raise NumericError(f"non-finite tilted gradient on {problem.label!r}")
    return grad


def _dual_arrays(problem, dual):
    lam = as_vector(dual.lam, problem.n_ineq) if problem.n_ineq else np.zeros(0)
    nu = as_vector(dual.nu, problem.n_eq) if problem.n_eq else np.zeros(0)
    if lam.size and lam.min() < 0:
        raise ConfigurationError(f"inequality multipliers must be >= 0, got {lam}")
    return lam, nu


def _u_grad_arrays(problem, x, lam, nu):
    """Hot-path u_grad on raw arrays; skips terms with an exactly-zero multiplier.

    Skipped terms would contribute an exact zero, so the result is unchanged;
    this also makes the unconstrained case run the same arithmetic as a plain
    gradient evaluation.  Finiteness is the caller's concern: the runners
    check the updated iterate and fall back to :func:`diagnose_nonfinite`
    to name the broken field.
    """
    grad = problem.f.grad(x)
    ineq = problem.ineq
    for i in range(len(ineq)):
        lam_i = lam[i]
        if lam_i != 0.0:
            grad = grad + lam_i * ineq[i].grad(x)
    eq = problem.eq
    for j in range(len(eq)):
        nu_j = nu[j]
        if nu_j != 0.0:
            grad = grad + nu_j * eq[j].grad(x)
    return grad


def diagnose_nonfinite(problem, x, lam=None, nu=None):
    """Re-evaluate every field at x and raise naming the first non-finite one.

    Slow path, called only after a runner detects a non-finite iterate or
    gradient; returns silently if all fields evaluate finite at x (e.g. the
    blow-up came from the noise scale or step size alone).
    """
    if not all_finite(x):
        return
    for fld in (problem.f, *problem.ineq, *problem.eq):
        val = fld.value(x)
        if not math.isfinite(val):
            raise NumericError(f"field {fld.name!r} returned non-finite value "
                               f"{val!r} at x={x}")
        grad = np.asarray(fld.grad(x), dtype=float)
        if not all_finite(grad):
            raise NumericError(f"field {fld.name!r} returned non-finite gradient "
                               f"{grad!r} at x={x}")


def project_nonneg(v):
    """Elementwise max(v, 0).  Idempotent; tiny negatives clamp to exactly 0.0."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def hinge_constraint(s, slack=0.0):
    """Turn a boundary function s into the constraint field [s(x)]_+ - slack.

    The subgradient selection is 1(s(x) > 0) * grad s(x): exactly zero on the
    boundary s(x) = 0 and in the interior, so interior dynamics are untouched.
    """
    if slack < 0:
        raise ConfigurationError(f"slack must be >= 0, got {slack}")

    def value(x):
        return max(s.value(x), 0.0) - slack

    def grad(x):
        if s.value(x) > 0.0:
            return s.grad(x)
        return np.zeros(np.shape(x))

    batch = None
    if s.batch_value is not None:
        def batch(rows):
            return np.maximum(s.batch_value(rows), 0.0) - slack

    return DifferentiableField(value=value, grad=grad,
                               name=f"hinge({s.name})", batch_value=batch)


def finite_diff_grad(field_fn, x, step=1e-5):
    """Central finite differences of a field; the gradient-check oracle.

    Kept deliberately independent of the analytic gradients it validates.
    """
    if step <= 0:
        raise ConfigurationError(f"finite-difference step must be > 0, got {step}")
    x = as_vector(x)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (field_fn.value(x + e) - field_fn.value(x - e)) / (2.0 * step)
    return grad


def quadratic_field(center, name="quadratic"):
    """The field ||x - center||^2 / 2 with gradient x - center."""
    center = as_vector(center)

    def value(x):
        d = x - center
        return 0.5 * float(d @ d)

    def grad(x):
        return x - center

    def batch(rows):
        d = rows - center
        return 0.5 * np.einsum("ij,ij->i", d, d)

    return DifferentiableField(value=value, grad=grad, name=name, batch_value=batch)


def linear_field(offset, coef, name="linear"):
    """The affine field offset + coef.x with constant gradient coef."""
    coef = as_vector(coef)

    def value(x):
        return float(offset + coef @ x)

    def grad(x):
        return coef.copy()

    def batch(rows):
        return offset + rows @ coef

    return DifferentiableField(value=value, grad=grad, name=name, batch_value=batch)


def gradient_check(field_fn, points, step=1e-5, rel_tol=1e-5,
                   kink_indicator=None, kink_margin=1e-4):
    """Compare analytic gradients against central differences at many points.

    ``kink_indicator`` maps a point to the distance-like quantity whose small
    values flag proximity to a non-smooth kink; such points are skipped.
    Returns the number of points actually checked.  Raises AssertionError on
    the first failure.
    """
    checked = 0
    for x in points:
        x = as_vector(x)
        if kink_indicator is not None and abs(kink_indicator(x)) < kink_margin:
            continue
        analytic = field_fn.grad_checked(x)
        numeric = finite_diff_grad(field_fn, x, step)
        scale = max(1.0, float(np.linalg.norm(analytic)))
        err = float(np.linalg.norm(analytic - numeric)) / scale
        if err >= rel_tol:
            raise AssertionError(
                f"gradient check failed for {field_fn.name} at {x}: "
                f"analytic {analytic}, numeric {numeric}, rel err {err:.3g}")
        checked += 1
    return checked


def check_problem_gradients(problem, n_points=100, seed=0, box=3.0, rel_tol=1e-5):
    """Run the finite-difference gradient check on every field of a problem.

    Points are drawn uniformly from [-box, box]^d around the origin shifted
    by nothing in particular; hinge fields skip points near their kink.
    """
    rng = np.random.default_rng(seed)
    points = rng.uniform(-box, box, size=(n_points, problem.dim))
    fields = [problem.f, *problem.ineq, *problem.eq]
    for fld in fields:
        kink = None
        for s in problem.support:
            if fld.name == f"hinge({s.name})":
                kink = s.value
        gradient_check(fld, points, rel_tol=rel_tol, kink_indicator=kink)
