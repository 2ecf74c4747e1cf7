"""Selection rule, selected-entropy targets and the estimator families.

The estimand throughout is ``ln theta`` of the selected population; the full
Shannon entropy only adds the known constant returned by
:func:`entropy_constant`.

Estimators are small frozen dataclasses. Each one knows its ``target``
("worse" or "better") and evaluates vectorised over numpy arrays of
``(x1, x2)`` so the Monte Carlo engine can push whole sample blocks through
it; :func:`estimate` is the scalar entry point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .constants import lambda_threshold
from .errors import DomainError
from .numerics import digamma

WORSE = "worse"
BETTER = "better"
TARGETS = (WORSE, BETTER)


def _positive(value, name):
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be finite and positive, got {value!r}")
    return value


@dataclass(frozen=True)
class SufficientStat:
    """Observed totals of the two samples and their common shape alpha = n * beta."""

    x1: float
    x2: float
    alpha: float

    def __post_init__(self):
        for name in ("x1", "x2", "alpha"):
            object.__setattr__(self, name, _positive(getattr(self, name), name))

    def scaled(self, a):
        return SufficientStat(a * self.x1, a * self.x2, self.alpha)

    def swapped(self):
        return SufficientStat(self.x2, self.x1, self.alpha)


@dataclass(frozen=True)
class ScaleParams:
    theta1: float
    theta2: float

    def __post_init__(self):
        _positive(self.theta1, "theta1")
        _positive(self.theta2, "theta2")

    @property
    def mu(self):
        return max(self.theta1, self.theta2) / min(self.theta1, self.theta2)

    @property
    def theta(self):
        return 1.0 / self.mu


@dataclass(frozen=True)
class SelectionOutcome:
    z1: float
    z2: float
    t: float
    v: float
    s_index: int
    m_index: int


def select(stat):
    """Apply the natural selection rule. Ties pick population 1 for both goals."""
    z1, z2 = min(stat.x1, stat.x2), max(stat.x1, stat.x2)
    return SelectionOutcome(
        z1=z1,
        z2=z2,
        t=z1 / z2,
        v=z2 / z1,
        s_index=1 if stat.x1 >= stat.x2 else 2,
        m_index=1 if stat.x1 <= stat.x2 else 2,
    )


def entropy_constant(alpha):
    """alpha + ln Gamma(alpha) + (1 - alpha) psi(alpha)."""
    alpha = _positive(alpha, "alpha")
    return alpha + math.lgamma(alpha) + (1.0 - alpha) * digamma(alpha)


def entropy_gamma(theta, alpha):
    """Shannon entropy of Gamma(shape alpha, scale theta)."""
    return math.log(_positive(theta, "theta")) + entropy_constant(alpha)


def selected_log_scale(x1, x2, theta1, theta2, target):
    """Vectorised ln(theta) of the selected population."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    l1, l2 = math.log(theta1), math.log(theta2)
    if target == WORSE:
        out = np.where(x1 >= x2, l1, l2)
    elif target == BETTER:
        out = np.where(x1 <= x2, l1, l2)
    else:
        raise DomainError(f"unknown target {target!r}")
    return float(out) if out.ndim == 0 else out


def true_selected_entropy(params, stat, target):
    """ln theta_S (worse) or ln theta_M (better); the additive entropy constant is excluded."""
    return selected_log_scale(stat.x1, stat.x2, params.theta1, params.theta2, target)


# --------------------------------------------------------------------------
# Estimator families
# --------------------------------------------------------------------------

def _fmt(x):
    return f"{x:.6g}"


class Estimator:
    """Base for estimator variants; subclasses implement :meth:`apply`."""

    target: str

    def apply(self, x1, x2, alpha):  # pragma: no cover - interface
        raise NotImplementedError

    @property
    def label(self):  # pragma: no cover - interface
        raise NotImplementedError

    def validate(self, alpha):
        return None


def _minmax(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return np.minimum(x1, x2), np.maximum(x1, x2)


@dataclass(frozen=True)
class NaiveWorse(Estimator):
    """ln Z2 - c."""

    c: float
    target = WORSE

    def apply(self, x1, x2, alpha):
        _, z2 = _minmax(x1, x2)
        return np.log(z2) - self.c

    @property
    def label(self):
        return f"NaiveWorse(c={_fmt(self.c)})"


@dataclass(frozen=True)
class GenBayesWorse(Estimator):
    """Posterior mean under the prior (theta1 theta2)^-(beta+1): ln Z2 - psi(alpha + beta)."""

    beta: float
    target = WORSE

    def validate(self, alpha):
        if not self.beta > -alpha:
            raise DomainError(f"prior exponent beta must exceed -alpha, got {self.beta!r}")

    def apply(self, x1, x2, alpha):
        self.validate(alpha)
        _, z2 = _minmax(x1, x2)
        return np.log(z2) - digamma(alpha + self.beta)

    @property
    def label(self):
        return f"GenBayesWorse(beta={_fmt(self.beta)})"


@dataclass(frozen=True)
class ShrinkWorse(Estimator):
    """ln Z2 - c, replaced by ln(X1 + X2) - psi(2 alpha) once T reaches exp(psi(2 alpha) - c) - 1."""

    c: float
    target = WORSE

    def threshold(self, alpha):
        return math.expm1(digamma(2.0 * alpha) - self.c)

    def apply(self, x1, x2, alpha):
        z1, z2 = _minmax(x1, x2)
        shrink = z1 / z2 >= self.threshold(alpha)
        return np.where(shrink, np.log(z1 + z2) - digamma(2.0 * alpha), np.log(z2) - self.c)

    @property
    def label(self):
        return f"ShrinkWorse(c={_fmt(self.c)})"


@dataclass(frozen=True)
class NaiveBetter(Estimator):
    """ln Z1 - c."""

    c: float
    target = BETTER

    def apply(self, x1, x2, alpha):
        z1, _ = _minmax(x1, x2)
        return np.log(z1) - self.c

    @property
    def label(self):
        return f"NaiveBetter(c={_fmt(self.c)})"


@dataclass(frozen=True)
class GenBayesBetter(Estimator):
    beta: float
    target = BETTER

    def validate(self, alpha):
        if not self.beta > -alpha:
            raise DomainError(f"prior exponent beta must exceed -alpha, got {self.beta!r}")

    def apply(self, x1, x2, alpha):
        self.validate(alpha)
        z1, _ = _minmax(x1, x2)
        return np.log(z1) - digamma(alpha + self.beta)

    @property
    def label(self):
        return f"GenBayesBetter(beta={_fmt(self.beta)})"


@dataclass(frozen=True)
class ShrinkBetter(Estimator):
    """Shrinks ln Z1 - c to ln(Z1 + Z2) - psi(2 alpha) when V is close to 1.

    The shrink branch needs V <= lambda_threshold(guard_shape) and
    V > exp(psi(2 alpha) - c) - 1. ``guard_shape`` defaults to the shape of
    the sufficient statistic; passing the per-observation shape gives the
    alternative guard reading for the two-sample failure-time example.
    """

    c: float
    guard_shape: float | None = None
    target = BETTER

    def apply(self, x1, x2, alpha):
        z1, z2 = _minmax(x1, x2)
        v = z2 / z1
        lam = lambda_threshold(alpha if self.guard_shape is None else self.guard_shape)
        shrink = (v <= lam) & (v > math.expm1(digamma(2.0 * alpha) - self.c))
        return np.where(shrink, np.log(z1 + z2) - digamma(2.0 * alpha), np.log(z1) - self.c)

    @property
    def label(self):
        if self.guard_shape is None:
            return f"ShrinkBetter(c={_fmt(self.c)})"
        return f"ShrinkBetter(c={_fmt(self.c)},guard_shape={_fmt(self.guard_shape)})"


@dataclass(frozen=True)
class CustomWorse(Estimator):
    """ln Z2 - phi(T) for an arbitrary vectorised phi on (0, 1]."""

    phi: Callable
    name: str = "phi"
    target = WORSE

    def apply(self, x1, x2, alpha):
        z1, z2 = _minmax(x1, x2)
        return np.log(z2) - np.asarray(self.phi(z1 / z2), dtype=float)

    @property
    def label(self):
        return f"CustomWorse({self.name})"


@dataclass(frozen=True)
class CustomBetter(Estimator):
    """ln Z1 - phi(V) for an arbitrary vectorised phi on [1, inf)."""

    phi: Callable
    name: str = "phi"
    target = BETTER

    def apply(self, x1, x2, alpha):
        z1, z2 = _minmax(x1, x2)
        return np.log(z1) - np.asarray(self.phi(z2 / z1), dtype=float)

    @property
    def label(self):
        return f"CustomBetter({self.name})"


def estimate(stat, estimator):
    """Evaluate one estimator at one observed sufficient statistic."""
    estimator.validate(stat.alpha)
    return float(estimator.apply(stat.x1, stat.x2, stat.alpha))


# --------------------------------------------------------------------------
# Improvement operators
# --------------------------------------------------------------------------

def improve_worse(phi_value, t, alpha):
    """Cap phi(t) at psi(2 alpha) - ln(1 + t). Vectorised over phi_value and t."""
    cap = digamma(2.0 * _positive(alpha, "alpha")) - np.log1p(np.asarray(t, dtype=float))
    phi_value = np.asarray(phi_value, dtype=float)
    out = np.where(phi_value > cap, cap, phi_value)
    return float(out) if out.ndim == 0 else out


def improve_better(phi_value, v, alpha):
    """Cap phi(v) at psi(2 alpha) - ln(1 + v), but only while v <= lambda_threshold(alpha)."""
    alpha = _positive(alpha, "alpha")
    v = np.asarray(v, dtype=float)
    cap = digamma(2.0 * alpha) - np.log1p(v)
    phi_value = np.asarray(phi_value, dtype=float)
    out = np.where((phi_value > cap) & (v <= lambda_threshold(alpha)), cap, phi_value)
    return float(out) if out.ndim == 0 else out


def improved(estimator, alpha):
    """Wrap a worse/better equivariant estimator with the matching improvement operator.

    Naive and generalized Bayes estimators are treated as constant phi.
    """
    if estimator.target == WORSE:
        base = _phi_of(estimator, alpha)
        return CustomWorse(lambda t: improve_worse(base(t), t, alpha), name=f"improved {estimator.label}")
    base = _phi_of(estimator, alpha)
    return CustomBetter(lambda v: improve_better(base(v), v, alpha), name=f"improved {estimator.label}")


def _phi_of(estimator, alpha):
    if isinstance(estimator, (NaiveWorse, NaiveBetter)):
        c = estimator.c
    elif isinstance(estimator, (GenBayesWorse, GenBayesBetter)):
        estimator.validate(alpha)
        c = digamma(alpha + estimator.beta)
    elif isinstance(estimator, (CustomWorse, CustomBetter)):
        return estimator.phi
    else:
        raise DomainError(f"no equivariant phi form for {estimator.label}")
    return lambda r: np.full(np.shape(r), c) if np.ndim(r) else c


# --------------------------------------------------------------------------
# Text parsing (CLI)
# --------------------------------------------------------------------------

_FAMILIES = {
    "naive-worse": NaiveWorse,
    "genbayes-worse": GenBayesWorse,
    "shrink-worse": ShrinkWorse,
    "naive-better": NaiveBetter,
    "genbayes-better": GenBayesBetter,
    "shrink-better": ShrinkBetter,
}


def named_constant(token, alpha):
    """Resolve ``ln_alpha``, ``ln_alpha1``, ``psi``, ``c1``, ``c2``, ``c3`` or a number."""
    from . import constants

    symbols = {
        "ln_alpha": lambda: math.log(alpha),
        "ln_alpha1": lambda: math.log1p(alpha),
        "psi": lambda: digamma(alpha),
        "c1": lambda: constants.c1(alpha),
        "c2": lambda: constants.c2(alpha),
        "c3": lambda: constants.c3(alpha),
    }
    key = token.strip().lower()
    if key in symbols:
        return symbols[key]()
    try:
        return float(key)
    except ValueError:
        raise DomainError(f"unknown constant {token!r}; expected a number or one of {sorted(symbols)}") from None


def parse_estimator(text, alpha):
    """Parse ``family:param`` e.g. ``shrink-worse:ln_alpha`` or ``genbayes-better:-0.2``."""
    family, sep, param = text.partition(":")
    family = family.strip().lower()
    if family not in _FAMILIES or not sep:
        raise DomainError(f"bad estimator {text!r}; expected one of {sorted(_FAMILIES)} followed by ':param'")
    cls = _FAMILIES[family]
    if cls in (GenBayesWorse, GenBayesBetter):
        est = cls(float(param))
        est.validate(alpha)
        return est
    return cls(named_constant(param, alpha))


def default_estimators(target, alpha):
    """The three natural estimators and the two shrinkage versions for ``target``."""
    la, la1, psi = math.log(alpha), math.log1p(alpha), digamma(alpha)
    if target == WORSE:
        return [NaiveWorse(la), NaiveWorse(la1), NaiveWorse(psi), ShrinkWorse(la), ShrinkWorse(la1)]
    if target == BETTER:
        return [NaiveBetter(la), NaiveBetter(la1), NaiveBetter(psi), ShrinkBetter(la), ShrinkBetter(la1)]
    raise DomainError(f"unknown target {target!r}")
