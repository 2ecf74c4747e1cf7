"""Seeded gamma sampling and Monte Carlo risk evaluation.

Every grid point is simulated from its own family of substreams keyed by
``(grid index, block index)`` under the master seed, and blocks are always
concatenated in block order. The numbers written out therefore do not depend
on how many worker threads were used. All estimators in a configuration see
the same draws (common random numbers), so paired differences are cheap to
resolve.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .estimators import BETTER, TARGETS, WORSE, Estimator, selected_log_scale

DEFAULT_REPS = 60_000
DEFAULT_SEED = 20240607
DEFAULT_MU_GRID = tuple(1.0 + 0.25 * k for k in range(37))
BLOCK_SIZE = 8192

CSV_COLUMNS = ("target", "alpha", "mu", "estimator_label", "mse", "mse_se",
               "abs_bias", "bias_se", "reps", "seed")


def substream(seed, *key):
    """Independent generator for ``key`` under the master ``seed`` (Philox counter streams)."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _marsaglia_tsang(alpha, n, rng):
    # requires alpha >= 1
    d = alpha - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        m = need + need // 16 + 16
        x = rng.standard_normal(m)
        u = rng.random(m)
        v = 1.0 + c * x
        ok = v > 0.0
        v = np.where(ok, v * v * v, 1.0)
        with np.errstate(divide="ignore"):
            ok &= np.log(u) < 0.5 * x * x + d - d * v + d * np.log(v)
        acc = d * v[ok]
        take = min(acc.size, need)
        out[filled:filled + take] = acc[:take]
        filled += take
    return out


def sample_gamma(alpha, theta, rng, size=None):
    """Draw Gamma(shape ``alpha``, scale ``theta``) variates.

    Marsaglia-Tsang squeeze/rejection; shapes below one are boosted to
    ``alpha + 1`` and multiplied by ``U ** (1 / alpha)``.
    """
    alpha = float(alpha)
    theta = float(theta)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ConfigError(f"gamma shape must be positive, got {alpha!r}")
    if not (theta > 0 and math.isfinite(theta)):
        raise ConfigError(f"gamma scale must be positive, got {theta!r}")
    n = 1 if size is None else int(size)
    if alpha >= 1.0:
        g = _marsaglia_tsang(alpha, n, rng)
    else:
        g = _marsaglia_tsang(alpha + 1.0, n, rng)
        g *= rng.random(n) ** (1.0 / alpha)
    g *= theta
    return float(g[0]) if size is None else g


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    Populations have scales ``(scale, scale * mu)`` for each ``mu`` in the
    grid (reversed when ``swap``). For the better target the ratio
    min/max is ``theta = 1 / mu``.
    """

    alpha: float
    estimators: tuple
    target: str = WORSE
    mu_grid: tuple = DEFAULT_MU_GRID
    reps: int = DEFAULT_REPS
    seed: int = DEFAULT_SEED
    scale: float = 1.0
    swap: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mu_grid", tuple(float(m) for m in self.mu_grid))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        self.validate()

    def validate(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be positive, got {self.alpha!r}")
        if self.target not in TARGETS:
            raise ConfigError(f"target must be one of {TARGETS}, got {self.target!r}")
        if isinstance(self.reps, bool) or int(self.reps) != self.reps or self.reps < 1:
            raise ConfigError(f"reps must be a positive integer, got {self.reps!r}")
        if not self.mu_grid:
            raise ConfigError("mu grid is empty")
        for mu in self.mu_grid:
            if not (mu >= 1.0 and math.isfinite(mu)):
                raise ConfigError(f"grid values must be finite and >= 1, got {mu!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ConfigError(f"scale must be positive, got {self.scale!r}")
        if not self.estimators:
            raise ConfigError("no estimators given")
        for est in self.estimators:
            if not isinstance(est, Estimator):
                raise ConfigError(f"not an estimator: {est!r}")
            if est.target != self.target:
                raise ConfigError(f"{est.label} estimates the {est.target} target, run is for {self.target}")
            try:
                est.validate(self.alpha)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    @property
    def theta_grid(self):
        return tuple(1.0 / mu for mu in self.mu_grid)

    def scales(self, mu):
        pair = (self.scale, self.scale * mu)
        return pair[::-1] if self.swap else pair


@dataclass(frozen=True)
class RiskPoint:
    mu: float
    estimator: Estimator
    mse: float
    abs_bias: float
    mse_se: float
    bias_se: float
    reps: int
    bias: float = field(default=0.0)

    @property
    def label(self):
        return self.estimator.label


def simulate_errors(cfg, index):
    """Estimation errors at grid point ``index``: array of shape (n_estimators, reps)."""
    mu = cfg.mu_grid[index]
    th1, th2 = cfg.scales(mu)
    errs = np.empty((len(cfg.estimators), cfg.reps))
    for block, start in enumerate(range(0, cfg.reps, BLOCK_SIZE)):
        n = min(BLOCK_SIZE, cfg.reps - start)
        rng = substream(cfg.seed, index, block)
        x1 = sample_gamma(cfg.alpha, th1, rng, n)
        x2 = sample_gamma(cfg.alpha, th2, rng, n)
        truth = selected_log_scale(x1, x2, th1, th2, cfg.target)
        for k, est in enumerate(cfg.estimators):
            errs[k, start:start + n] = est.apply(x1, x2, cfg.alpha) - truth
    return errs


def _summarise(mu, est, e):
    n = e.size
    sq = e * e
    mean = float(np.mean(e))
    mse = float(np.mean(sq))
    if n > 1:
        bias_se = float(np.std(e, ddof=1)) / math.sqrt(n)
        mse_se = float(np.std(sq, ddof=1)) / math.sqrt(n)
    else:
        bias_se = mse_se = 0.0
    return RiskPoint(mu=mu, estimator=est, mse=mse, abs_bias=abs(mean), mse_se=mse_se,
                     bias_se=bias_se, reps=n, bias=mean)


def _default_workers(n_tasks):
    return max(1, min(n_tasks, os.cpu_count() or 1))


def _map_grid(fn, cfg, workers):
    indices = range(len(cfg.mu_grid))
    workers = _default_workers(len(cfg.mu_grid)) if workers is None else int(workers)
    if workers <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices))


def simulate_risk(cfg, workers=None):
    """MSE and absolute bias of every estimator at every grid point, grid-major order."""
    cfg.validate()

    def point(i):
        errs = simulate_errors(cfg, i)
        return [_summarise(cfg.mu_grid[i], est, errs[k]) for k, est in enumerate(cfg.estimators)]

    return [rp for chunk in _map_grid(point, cfg, workers) for rp in chunk]


@dataclass(frozen=True)
class DominancePoint:
    mu: float
    mse_a: float
    mse_b: float
    diff: float
    diff_se: float
    flagged: bool


def dominance_report(cfg, a, b, workers=None, n_se=3.0):
    """Paired comparison of ``a`` (claimed better) against ``b`` on common draws.

    ``diff`` is MSE(a) - MSE(b); a point is flagged when ``a`` loses by more
    than ``n_se`` standard errors of the paired loss difference.
    """
    run = SimConfig(alpha=cfg.alpha, estimators=(a, b), target=cfg.target, mu_grid=cfg.mu_grid,
                    reps=cfg.reps, seed=cfg.seed, scale=cfg.scale, swap=cfg.swap)

    def point(i):
        errs = simulate_errors(run, i)
        la, lb = errs[0] ** 2, errs[1] ** 2
        d = la - lb
        se = float(np.std(d, ddof=1)) / math.sqrt(d.size) if d.size > 1 else 0.0
        diff = float(np.mean(d))
        return DominancePoint(mu=run.mu_grid[i], mse_a=float(np.mean(la)), mse_b=float(np.mean(lb)),
                              diff=diff, diff_se=se, flagged=diff > n_se * se)

    return _map_grid(point, run, workers)


def write_risk_csv(points, cfg, stream):
    """Write RiskPoints as CSV; floats use ``repr`` so they round-trip exactly."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow([cfg.target, repr(float(cfg.alpha)), repr(p.mu), p.label, repr(p.mse), repr(p.mse_se),
                    repr(p.abs_bias), repr(p.bias_se), p.reps, cfg.seed])


def write_dominance_csv(points, cfg, a, b, stream):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(("target", "alpha", "mu", "a", "b", "mse_a", "mse_b", "diff", "diff_se", "flagged", "reps", "seed"))
    for p in points:
        w.writerow([cfg.target, repr(float(cfg.alpha)), repr(p.mu), a.label, b.label, repr(p.mse_a),
                    repr(p.mse_b), repr(p.diff), repr(p.diff_se), int(p.flagged), cfg.reps, cfg.seed])


def read_risk_csv(stream):
    """Parse a risk CSV back into a list of dicts with numeric fields converted."""
    rows = []
    for row in csv.DictReader(stream):
        for key in ("alpha", "mu", "mse", "mse_se", "abs_bias", "bias_se"):
            row[key] = float(row[key])
        row["reps"] = int(row["reps"])
        row["seed"] = int(row["seed"])
        rows.append(row)
    return rows


__all__ = [
    "BETTER", "WORSE", "CSV_COLUMNS", "DEFAULT_MU_GRID", "DEFAULT_REPS", "DEFAULT_SEED",
    "DominancePoint", "RiskPoint", "SimConfig", "dominance_report", "read_risk_csv",
    "sample_gamma", "simulate_errors", "simulate_risk", "substream", "write_dominance_csv",
    "write_risk_csv",
]
