"""Special functions, half-line quadrature and bracketed root finding.

Everything here is a pure function of its arguments. The gamma distribution
helpers are vectorised over ``z`` (numpy arrays in, arrays out; Python
scalars in, floats out) because the quadrature and Monte Carlo layers call
them on whole node/sample arrays.
"""

from __future__ import annotations

import heapq
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError, DomainError, QuadratureError

EULER_GAMMA = 0.57721566490153286061

TOL_ENV_VAR = "SELENTROPY_QUAD_TOL"

# Bernoulli-number coefficients B_2k / (2k) for the digamma asymptotic series.
_PSI_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
)
# B_2k for the trigamma asymptotic series (coefficient of x^-(2k+1)).
_TRIGAMMA_ASYMPTOTIC = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
)
_SHIFT = 6.0


def _check_positive(x, name="x"):
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} must be a finite positive number, got {x!r}")
    return x


def ln_gamma(x):
    """Natural log of the gamma function for x > 0."""
    return math.lgamma(_check_positive(x))


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0.

    Shifts the argument up to x >= 6 with psi(x) = psi(x + 1) - 1/x, then
    sums the Bernoulli asymptotic series.
    """
    x = _check_positive(x)
    acc = 0.0
    while x < _SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for coef in _PSI_ASYMPTOTIC:
        series += coef * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - series


def trigamma(x):
    """psi'(x) for x > 0; used as the Newton slope in inv_digamma."""
    x = _check_positive(x)
    acc = 0.0
    while x < _SHIFT:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    power = inv2 * inv
    for coef in _TRIGAMMA_ASYMPTOTIC:
        series += coef * power
        power *= inv2
    return acc + inv + 0.5 * inv2 + series


def inv_digamma(y, tol=1e-14, max_iter=100):
    """Return the unique x > 0 with digamma(x) == y."""
    y = float(y)
    if not math.isfinite(y):
        raise DomainError(f"inv_digamma needs a finite argument, got {y!r}")
    if y > 709.0:
        raise DomainError("inv_digamma argument too large for double precision")
    x = math.exp(y) + 0.5 if y >= -2.22 else -1.0 / (y + EULER_GAMMA)
    for _ in range(max_iter):
        step = (digamma(x) - y) / trigamma(x)
        x_new = x - step
        if x_new <= 0.0:
            x_new = 0.5 * x
        if abs(x_new - x) <= tol * x:
            return x_new
        x = x_new
    return x


# --------------------------------------------------------------------------
# Gamma(alpha, 1) distribution
# --------------------------------------------------------------------------

def _as_z(z):
    arr = np.asarray(z, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0):
        raise DomainError("gamma distribution functions need z >= 0")
    return arr


def _wrap(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def gamma_pdf(z, alpha):
    """Density of Gamma(shape=alpha, scale=1) at z >= 0."""
    alpha = _check_positive(alpha, "alpha")
    arr = _as_z(z)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.exp((alpha - 1.0) * np.log(arr) - arr - math.lgamma(alpha))
    zero = arr == 0.0
    if np.any(zero):
        out = np.where(zero, np.inf if alpha < 1.0 else (1.0 if alpha == 1.0 else 0.0), out)
    return _wrap(out, z)


def _log_prefactor(x, a):
    with np.errstate(divide="ignore"):
        return a * np.log(x) - x - math.lgamma(a)


def _lower_series(x, a, eps=4e-16, max_iter=100000):
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = np.full_like(x, 1.0 / a)
    total = term.copy()
    ap = a
    for _ in range(max_iter):
        ap += 1.0
        term = term * (x / ap)
        total = total + term
        if np.all(np.abs(term) <= np.abs(total) * eps):
            break
    with np.errstate(under="ignore"):
        return total * np.exp(_log_prefactor(x, a))


def _upper_fraction(x, a, eps=4e-16, max_iter=100000):
    """Regularized upper incomplete gamma Q(a, x) by modified Lentz continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, max_iter):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) <= eps):
            break
    with np.errstate(under="ignore"):
        return np.exp(_log_prefactor(x, a)) * h


def _incomplete(z, alpha):
    alpha = _check_positive(alpha, "alpha")
    arr = _as_z(z)
    flat = np.atleast_1d(arr).ravel()
    lower = np.zeros_like(flat)
    upper = np.ones_like(flat)
    series = (flat > 0.0) & (flat < alpha + 1.0)
    frac = flat >= alpha + 1.0
    frac_inf = frac & np.isinf(flat)
    frac = frac & ~frac_inf
    if np.any(series):
        p = _lower_series(flat[series], alpha)
        lower[series] = p
        upper[series] = 1.0 - p
    # prefactor underflow: Q is exactly 0 in double precision
    negligible = frac & (_log_prefactor(np.where(frac, flat, 1.0), alpha) < -750.0)
    lower[negligible] = 1.0
    upper[negligible] = 0.0
    frac = frac & ~negligible
    if np.any(frac):
        q = _upper_fraction(flat[frac], alpha)
        upper[frac] = q
        lower[frac] = 1.0 - q
    lower[frac_inf] = 1.0
    upper[frac_inf] = 0.0
    shape = np.shape(arr)
    return lower.reshape(shape), upper.reshape(shape), arr


def gamma_cdf(z, alpha):
    """Regularized lower incomplete gamma G_alpha(z) = P(alpha, z)."""
    lower, _, _ = _incomplete(z, alpha)
    return _wrap(lower, z)


def gamma_sf(z, alpha):
    """Survival function 1 - G_alpha(z), computed without cancellation."""
    _, upper, _ = _incomplete(z, alpha)
    return _wrap(upper, z)


# --------------------------------------------------------------------------
# Quadrature
# --------------------------------------------------------------------------

def _default_tol():
    raw = os.environ.get(TOL_ENV_VAR)
    if raw is None:
        return 1e-10
    value = float(raw)
    if not value > 0.0:
        raise DomainError(f"{TOL_ENV_VAR} must be positive, got {raw!r}")
    return value


@dataclass(frozen=True)
class QuadratureConfig:
    """Error targets for :func:`integrate_halfline`.

    Defaults come from ``SELENTROPY_QUAD_TOL`` when set, otherwise 1e-10.
    ``max_subdivisions`` bounds the number of bisections per finite piece.
    """

    abs_tol: float = field(default_factory=_default_tol)
    rel_tol: float = field(default_factory=_default_tol)
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")


# 15-point Kronrod nodes (non-negative half) with the embedded 7-point Gauss rule.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
for _i, _w in zip((1, 3, 5), _WG[:3]):
    _GAUSS_W[_i] = _w
    _GAUSS_W[14 - _i] = _w
_GAUSS_W[7] = _WG[3]


def _evaluate(f, x):
    try:
        y = f(x)
        y = np.broadcast_to(np.asarray(y, dtype=float), x.shape)
    except TypeError:
        y = np.array([float(f(v)) for v in x])
    return y


def _gk15(f, a, b):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    y = _evaluate(f, centre + half * _NODES)
    if not np.all(np.isfinite(y)):
        raise QuadratureError(f"integrand is not finite on [{a!r}, {b!r}]")
    kronrod = half * float(np.dot(_KRONROD_W, y))
    gauss = half * float(np.dot(_GAUSS_W, y))
    return kronrod, abs(kronrod - gauss)


def _adaptive(f, a, b, abs_tol, rel_tol, max_subdivisions):
    value, err = _gk15(f, a, b)
    heap = [(-err, a, b, value)]
    total, total_err = value, err
    for _ in range(max_subdivisions):
        if total_err <= max(abs_tol, rel_tol * abs(total)):
            break
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            # interval at floating-point resolution; cannot refine further
            heapq.heappush(heap, (neg_err, lo, hi, val))
            break
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        total += v1 + v2 - val
        total_err += e1 + e2 + neg_err
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    if total_err <= max(abs_tol, rel_tol * abs(total)):
        return total, total_err
    raise QuadratureError(
        f"no convergence on [{a!r}, {b!r}] after {max_subdivisions} subdivisions "
        f"(estimate {total!r}, error {total_err!r})",
        estimate=total,
        error=total_err,
    )


def integrate_halfline(f, cfg=None, points=(1.0,)):
    """Integrate ``f`` over (0, inf).

    ``f`` should accept a numpy array of abscissae; scalar-only callables are
    detected and evaluated point by point. ``points`` are interior
    breakpoints; place them where the integrand has its mass or kinks.

    Each piece is handled by adaptive Gauss-Kronrod (7/15) bisection:

    * (0, p1] is mapped by z = p1 * exp(1 - 1/w), w in (0, 1], which turns
      integrable power and logarithmic singularities at the origin into a
      smooth, rapidly vanishing integrand;
    * [p_i, p_{i+1}] are integrated directly;
    * the tail beyond the last point s is folded onto (0, 1] with z = s/u.

    Raises :class:`QuadratureError` instead of returning an unconverged value.
    """
    cfg = cfg or QuadratureConfig()
    pts = sorted({float(p) for p in points if p > 0 and math.isfinite(p)})
    if not pts:
        pts = [1.0]
    n_pieces = len(pts) + 1
    abs_tol = cfg.abs_tol / n_pieces
    first, last = pts[0], pts[-1]

    def head(w):
        with np.errstate(divide="ignore", under="ignore"):
            z = first * np.exp(1.0 - 1.0 / w)
        live = z > 0.0
        out = np.zeros_like(w)
        if np.any(live):
            zl = z[live]
            out[live] = _evaluate(f, zl) * (zl / (w[live] * w[live]))
        return out

    def tail(u):
        z = last / u
        fz = _evaluate(f, z)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.where(fz == 0.0, 0.0, fz * (z / u))

    parts = []
    args = [(head, 0.0, 1.0)]
    args += [(f, lo, hi) for lo, hi in zip(pts[:-1], pts[1:])]
    args.append((tail, 0.0, 1.0))
    for func, lo, hi in args:
        val, _ = _adaptive(func, lo, hi, abs_tol, cfg.rel_tol, cfg.max_subdivisions)
        parts.append(val)
    return math.fsum(parts)


def integrate_realline(f, cfg=None, points=(1.0,)):
    """Integrate ``f`` over the real line via the substitution u = ln z.

    ``points`` are breakpoints on the z = exp(u) scale.
    """

    def g(z):
        with np.errstate(divide="ignore"):
            u = np.log(z)
        return f(u) / z

    return integrate_halfline(g, cfg, points)


# --------------------------------------------------------------------------
# Root finding
# --------------------------------------------------------------------------

def find_root(g, bracket, xtol=1e-12, ftol=1e-10, max_iter=500):
    """Root of ``g`` inside ``bracket = (a, b)`` where g(a) and g(b) differ in sign.

    Illinois-modified false position; a plain bisection step is forced
    whenever two consecutive steps fail to halve the bracket. Stops when
    |g(x)| <= ftol or the bracket width is at most xtol.
    """
    lo, hi = sorted((float(bracket[0]), float(bracket[1])))
    flo, fhi = g(lo), g(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise BracketError(f"g({lo!r}) and g({hi!r}) have the same sign")
    retained = None
    width_before = hi - lo
    slow_steps = 0
    for _ in range(max_iter):
        if slow_steps >= 2:
            c = 0.5 * (lo + hi)
            slow_steps = 0
        else:
            c = (lo * fhi - hi * flo) / (fhi - flo)
            if not lo < c < hi:
                c = 0.5 * (lo + hi)
        fc = g(c)
        if abs(fc) <= ftol:
            return c
        if (fc < 0.0) == (flo < 0.0):
            lo, flo = c, fc
            if retained == "hi":
                fhi *= 0.5
            retained = "hi"
        else:
            hi, fhi = c, fc
            if retained == "lo":
                flo *= 0.5
            retained = "lo"
        width = hi - lo
        if width <= xtol:
            return 0.5 * (lo + hi)
        slow_steps = slow_steps + 1 if width > 0.5 * width_before else 0
        width_before = width
    raise BracketError(f"find_root did not converge on {tuple(bracket)!r}")
