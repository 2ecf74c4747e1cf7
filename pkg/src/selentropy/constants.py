"""Shape-indexed constants and kernels for the selected-entropy problem.

All functions take the common known shape ``alpha`` of the two sufficient
statistics. ``c1 <= c* <= c2`` bounds the risk-minimising constant for the
worse-selected target, ``c3 <= c* <= c1`` does the same for the better one,
and ``k_worse`` / ``k_better`` are the kernels whose infima give the
shrinkage thresholds ``phi_star_*``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields
from decimal import ROUND_DOWN, Decimal

import numpy as np

from .errors import DomainError
from .numerics import (
    QuadratureConfig,
    digamma,
    find_root,
    gamma_cdf,
    gamma_pdf,
    gamma_sf,
    integrate_halfline,
    integrate_realline,
    inv_digamma,
)

# Default shape values for the constants table, in order.
TABLE_ALPHAS = (
    0.2, 0.4, 0.6, 0.63, 0.8, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5, 5.5, 6, 6.05,
    6.5, 7, 8, 9, 10, 12, 15, 16, 18, 20,
)


def _shape(alpha):
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 0.0:
        raise DomainError(f"shape alpha must be finite and positive, got {alpha!r}")
    return alpha


def _mass_points(alpha, *extra):
    """Breakpoints bracketing the bulk of a Gamma(alpha, 1) density."""
    spread = 6.0 * math.sqrt(alpha) + 6.0
    pts = {alpha, alpha + spread}
    pts.update(p for p in extra if 0.0 < p < alpha + spread)
    return tuple(sorted(pts))


def c1(alpha):
    """Infimum of c*(mu) over mu >= 1, i.e. digamma(alpha)."""
    return digamma(_shape(alpha))


def c2(alpha, cfg=None):
    """2 * integral of ln(z) G(z) g(z): expected log of the larger of two Gamma(alpha, 1)."""
    alpha = _shape(alpha)

    def f(z):
        with np.errstate(divide="ignore"):
            return np.log(z) * gamma_cdf(z, alpha) * gamma_pdf(z, alpha)

    return 2.0 * integrate_halfline(f, cfg, _mass_points(alpha))


def c3(alpha, cfg=None):
    """2 * integral of ln(z) [1 - G(z)] g(z): expected log of the smaller of two Gamma(alpha, 1)."""
    alpha = _shape(alpha)

    def f(z):
        with np.errstate(divide="ignore"):
            return np.log(z) * gamma_sf(z, alpha) * gamma_pdf(z, alpha)

    return 2.0 * integrate_halfline(f, cfg, _mass_points(alpha))


def beta0(alpha, cfg=None):
    """Upper end of the admissible generalized-Bayes prior exponent (worse target)."""
    alpha = _shape(alpha)
    return inv_digamma(c2(alpha, cfg)) - alpha


def beta1(alpha, cfg=None):
    """Lower end of the admissible generalized-Bayes prior exponent (better target)."""
    alpha = _shape(alpha)
    return inv_digamma(c3(alpha, cfg)) - alpha


def c_star_worse(mu, alpha, cfg=None):
    """E[ln Z2 - H_S] when the scale ratio is mu >= 1; minimiser of the naive risk."""
    alpha = _shape(alpha)
    mu = float(mu)
    if not mu >= 1.0 or not math.isfinite(mu):
        raise DomainError(f"mu must be a finite value >= 1, got {mu!r}")
    pts = _mass_points(alpha, alpha / mu, alpha * mu)

    def f(z):
        with np.errstate(divide="ignore"):
            logz = np.log(z) * gamma_pdf(z, alpha)
        return logz * (gamma_cdf(z / mu, alpha) + gamma_cdf(mu * z, alpha))

    return integrate_halfline(f, cfg, pts)


def c_star_worse_derivative(mu, alpha):
    """Closed-form d c*(mu) / d mu (non-positive)."""
    alpha = _shape(alpha)
    mu = float(mu)
    if mu < 1.0:
        raise DomainError("mu must be >= 1")
    if mu == 1.0:
        return 0.0
    log_mag = (
        math.lgamma(2 * alpha) - 2 * math.lgamma(alpha)
        + (alpha - 1) * math.log(mu) - 2 * alpha * math.log1p(mu)
    )
    return -math.exp(log_mag) * math.log(mu)


def c_star_better(theta, alpha, cfg=None):
    """E[ln Z1 - H_M] when the scale ratio is theta in (0, 1]."""
    alpha = _shape(alpha)
    theta = float(theta)
    if not 0.0 < theta <= 1.0:
        raise DomainError(f"theta must lie in (0, 1], got {theta!r}")
    pts = _mass_points(alpha, alpha * theta, alpha / theta)

    def f(z):
        with np.errstate(divide="ignore"):
            logz = np.log(z) * gamma_pdf(z, alpha)
        return logz * (gamma_sf(theta * z, alpha) + gamma_sf(z / theta, alpha))

    return integrate_halfline(f, cfg, pts)


def c_star_better_derivative(theta, alpha):
    """Closed-form d c*(theta) / d theta (non-positive on (0, 1])."""
    alpha = _shape(alpha)
    theta = float(theta)
    if not 0.0 < theta <= 1.0:
        raise DomainError("theta must lie in (0, 1]")
    if theta == 1.0:
        return 0.0
    log_mag = (
        math.lgamma(2 * alpha) - 2 * math.lgamma(alpha)
        + (alpha - 1) * math.log(theta) - 2 * alpha * math.log1p(theta)
    )
    return math.exp(log_mag) * math.log(theta)


# --------------------------------------------------------------------------
# Conditional kernels
# --------------------------------------------------------------------------

def _kernel(r, s, alpha):
    # (1+rs)^{2a} ln(1+r/s) + (s+r)^{2a} ln(1+rs), normalised; weights in log space
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    expo = 2.0 * alpha * (np.log(s + r) - np.log1p(r * s))
    with np.errstate(over="ignore"):
        w = 1.0 / (1.0 + np.exp(expo))
    out = w * np.log1p(r / s) + (1.0 - w) * np.log1p(r * s)
    return float(out) if out.ndim == 0 else out


def k_worse(t, mu, alpha):
    """Kernel k_t(mu); psi(2 alpha) - k_worse is E[ln Z2 - H_S | T = t]."""
    alpha = _shape(alpha)
    t_arr, mu_arr = np.asarray(t, dtype=float), np.asarray(mu, dtype=float)
    if np.any((t_arr <= 0) | (t_arr > 1)) or np.any(mu_arr < 1):
        raise DomainError("k_worse needs t in (0, 1] and mu >= 1")
    return _kernel(t, mu, alpha)


def k_better(v, theta, alpha):
    """Kernel k_v(theta); psi(2 alpha) - k_better is E[ln Z1 - H_M | V = v]."""
    alpha = _shape(alpha)
    v_arr, th_arr = np.asarray(v, dtype=float), np.asarray(theta, dtype=float)
    if np.any(v_arr < 1) or np.any((th_arr <= 0) | (th_arr > 1)):
        raise DomainError("k_better needs v >= 1 and theta in (0, 1]")
    return _kernel(v, theta, alpha)


def lambda_threshold(alpha):
    """Upper limit on V = Z2/Z1 below which the better-target shrinkage applies."""
    alpha = _shape(alpha)
    return min(1.0 + 1.0 / (2.0 * alpha), 1.0 + math.sqrt(3.0))


def phi_star_worse(t, alpha):
    """sup over mu of the conditional minimiser: psi(2 alpha) - ln(1 + t)."""
    alpha = _shape(alpha)
    t = float(t)
    if not 0.0 < t <= 1.0:
        raise DomainError(f"t must lie in (0, 1], got {t!r}")
    return digamma(2.0 * alpha) - math.log1p(t)


def phi_star_better(v, alpha):
    alpha = _shape(alpha)
    v = float(v)
    if not v >= 1.0:
        raise DomainError(f"v must be >= 1, got {v!r}")
    return digamma(2.0 * alpha) - math.log1p(v)


def _conditional_pdf(u, r, s, alpha):
    u = np.asarray(u, dtype=float)
    ls = math.log(s)
    with np.errstate(over="ignore"):
        eu = np.exp(u)
    l1 = -alpha * ls + 2 * alpha * u - (1.0 + r / s) * eu
    l2 = alpha * ls + 2 * alpha * u - (1.0 + r * s) * eu
    log_norm = math.lgamma(2 * alpha) + np.logaddexp(
        -alpha * ls - 2 * alpha * math.log1p(r / s),
        alpha * ls - 2 * alpha * math.log1p(r * s),
    )
    with np.errstate(under="ignore"):
        out = np.exp(np.logaddexp(l1, l2) - log_norm)
    return float(out) if out.ndim == 0 else out


def conditional_pdf_worse(u, t, mu, alpha):
    """Density of U = ln Z2 - H_S given T = t, at scale ratio mu."""
    alpha = _shape(alpha)
    if not (0.0 < t <= 1.0 and mu >= 1.0):
        raise DomainError("conditional_pdf_worse needs t in (0, 1] and mu >= 1")
    return _conditional_pdf(u, float(t), float(mu), alpha)


def conditional_pdf_better(u, v, theta, alpha):
    """Density of U1 = ln Z1 - H_M given V = v, at scale ratio theta."""
    alpha = _shape(alpha)
    if not (v >= 1.0 and 0.0 < theta <= 1.0):
        raise DomainError("conditional_pdf_better needs v >= 1 and theta in (0, 1]")
    return _conditional_pdf(u, float(v), float(theta), alpha)


def conditional_moment(pdf, order=1, cfg=None, centre=1.0):
    """Integral of u**order * pdf(u) over the real line.

    ``centre`` is a breakpoint on the exp(u) scale near the bulk of the mass.
    """
    return integrate_realline(lambda u: u ** order * pdf(u), cfg, points=(centre,))


# --------------------------------------------------------------------------
# Crossovers and table
# --------------------------------------------------------------------------

def crossover_ln_alpha(bracket=(0.3, 2.0), cfg=None):
    """Shape at which c2(alpha) = ln(alpha)."""
    return find_root(lambda a: c2(a, cfg) - math.log(a), bracket)


def crossover_ln_alpha_plus_1(bracket=(3.0, 10.0), cfg=None):
    """Shape at which c2(alpha) = ln(alpha + 1)."""
    return find_root(lambda a: c2(a, cfg) - math.log1p(a), bracket)


@dataclass(frozen=True)
class ConstantsRow:
    alpha: float
    c1: float
    c2: float
    c3: float
    ln_alpha: float
    ln_alpha_plus_1: float
    beta0: float
    beta1: float
    psi2a_minus_ln2: float

    @classmethod
    def compute(cls, alpha, cfg=None):
        alpha = _shape(alpha)
        v1, v2, v3 = c1(alpha), c2(alpha, cfg), c3(alpha, cfg)
        return cls(
            alpha=alpha,
            c1=v1,
            c2=v2,
            c3=v3,
            ln_alpha=math.log(alpha),
            ln_alpha_plus_1=math.log1p(alpha),
            beta0=inv_digamma(v2) - alpha,
            beta1=inv_digamma(v3) - alpha,
            psi2a_minus_ln2=digamma(2.0 * alpha) - math.log(2.0),
        )


COLUMNS = tuple(f.name for f in fields(ConstantsRow))


def generate_table(alphas=TABLE_ALPHAS, cfg=None, workers=None):
    """One :class:`ConstantsRow` per shape, in input order."""
    alphas = [_shape(a) for a in alphas]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda a: ConstantsRow.compute(a, cfg), alphas))
    return [ConstantsRow.compute(a, cfg) for a in alphas]


def write_table_csv(rows, stream):
    """Full-precision CSV (shortest round-tripping repr of every float)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([repr(v) for v in astuple(row)])


def _fixed(value, digits, truncate):
    if not truncate:
        return f"{value:.{digits}f}"
    q = Decimal(repr(value)).quantize(Decimal(1).scaleb(-digits), rounding=ROUND_DOWN)
    return f"{q:f}" if q else f"{0:.{digits}f}"


def format_table(rows, digits=3, truncate=True):
    """Fixed-width text rendering to ``digits`` decimals.

    Truncation (the default) matches the reference table layout,
    which chops rather than rounds; pass ``truncate=False`` to round.
    """
    header = ["alpha", "c1", "c2", "c3", "ln a", "ln(a+1)", "beta0", "beta1", "psi(2a)-ln2"]
    lines = ["  ".join(f"{h:>11}" for h in header)]
    for row in rows:
        vals = astuple(row)
        cells = [f"{vals[0]:>11g}"] + [f"{_fixed(v, digits, truncate):>11}" for v in vals[1:]]
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"
