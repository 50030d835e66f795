"""Power-law fitting and holding-time death-rate statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cohort import FlowLedger

# z_min = 1, z_max swept 125..200 in unit steps (76 nested fits)
DEFAULT_WINDOWS: tuple[tuple[int, int], ...] = tuple((1, zmax) for zmax in range(125, 201))


class PowerLawError(ValueError):
    pass


@dataclass(frozen=True)
class PowerLawFit:
    """Log-log OLS fit ``ln y = -alpha ln x + beta`` over nested windows."""

    alpha: float
    alpha_std: float
    beta: float
    windows: tuple[tuple[int, int], ...]
    alphas: np.ndarray
    betas: np.ndarray
    r2: np.ndarray
    dropped: int = 0
    refused: int = 0

    @property
    def n_fits(self) -> int:
        return len(self.windows)

    @property
    def mean_finite(self) -> bool:
        """Whether a density decaying with this exponent has a finite mean."""
        return self.alpha > 2.0


def powerlaw_fit(
    x: Sequence[float],
    y: Sequence[float],
    windows: Sequence[tuple[float, float]] = DEFAULT_WINDOWS,
    min_points: int = 5,
) -> PowerLawFit:
    """Fit a power law to ``(x, y)`` on every window ``[lo, hi]``.

    Non-positive ``y`` cannot enter a log fit and are dropped (counted in
    ``dropped``). Windows with fewer than ``min_points`` usable points are
    refused; if every window is refused a :class:`PowerLawError` is raised.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same shape")
    ok = np.isfinite(y) & (y > 0) & np.isfinite(x) & (x > 0)
    dropped = int(np.count_nonzero(~ok))
    if not ok.any():
        raise PowerLawError("no positive data points")
    order = np.argsort(x[ok], kind="stable")
    xs = x[ok][order]
    lx, ly = np.log(xs), np.log(y[ok][order])
    cum = [np.concatenate(([0.0], np.cumsum(a))) for a in (np.ones_like(lx), lx, ly, lx * lx, lx * ly, ly * ly)]

    kept, alphas, betas, r2s = [], [], [], []
    for lo, hi in windows:
        a = int(np.searchsorted(xs, lo, side="left"))
        b = int(np.searchsorted(xs, hi, side="right"))
        n, sx, sy, sxx, sxy, syy = (c[b] - c[a] for c in cum)
        if n < min_points:
            continue
        vx = n * sxx - sx * sx
        if vx <= 1e-12 * max(1.0, n * sxx):
            continue
        cov = n * sxy - sx * sy
        slope = cov / vx
        vy = n * syy - sy * sy
        kept.append((lo, hi))
        alphas.append(-slope)
        betas.append((sy - slope * sx) / n)
        r2s.append(cov * cov / (vx * vy) if vy > 1e-12 * max(1.0, n * syy) else 1.0)
    if not kept:
        raise PowerLawError(f"every fit window has fewer than {min_points} usable points")
    alphas, betas, r2s = np.array(alphas), np.array(betas), np.array(r2s)
    return PowerLawFit(
        alpha=float(alphas.mean()),
        alpha_std=float(alphas.std()),
        beta=float(betas.mean()),
        windows=tuple(kept),
        alphas=alphas,
        betas=betas,
        r2=r2s,
        dropped=dropped,
        refused=len(windows) - len(kept),
    )


@dataclass(frozen=True)
class Sampling:
    """Analysis times ``t_from, t_from + every, ... <= t_to`` (absolute grid indices)."""

    t_from: int | None = None
    t_to: int | None = None
    every: int = 1

    def times(self, ledger: FlowLedger, earliest_offset: int = 1) -> np.ndarray:
        lo = ledger.start + earliest_offset if self.t_from is None else self.t_from
        hi = ledger.horizon if self.t_to is None else self.t_to
        lo = max(lo, ledger.start + earliest_offset)
        hi = min(hi, ledger.horizon)
        if self.every < 1:
            raise ValueError("sampling step must be >= 1")
        return np.arange(lo, hi + 1, self.every, dtype=np.int64)


def _death_rates(ledger: FlowLedger, times: np.ndarray):
    """Yield ``(t, ages, rates)`` for sampled ``t`` over non-empty cohorts ``tau < t``."""
    wanted = set(int(t) for t in times)
    if not wanted:
        return
    last = max(wanted)
    prev = None
    for t, n in ledger.iter_states(until=last):
        if t in wanted and prev is not None:
            taus, amounts = ledger.deaths_at(t)
            held = prev
            alive = np.flatnonzero(held > 0)
            rates = np.zeros(alive.size)
            pos = np.searchsorted(alive, taus - ledger.start)
            rates[pos] = amounts / held[taus - ledger.start]
            ages = (t - ledger.start) - alive
            yield t, ages, rates
        if t + 1 in wanted:
            prev = n.copy()
        else:
            prev = None


@dataclass(frozen=True)
class AvgTransition:
    ages: np.ndarray
    pi_mean: np.ndarray
    n_samples: np.ndarray
    fit: PowerLawFit | None
    n_times: int
    gaps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def avg_transition(
    ledger: FlowLedger,
    sampling: Sampling = Sampling(),
    windows: Sequence[tuple[int, int]] = DEFAULT_WINDOWS,
    min_times: int = 20,
) -> AvgTransition:
    """Time-averaged death rate per age and its power-law fit.

    Empty cohorts are undefined at a given time and excluded from that age's
    mean; ages with no defined sample are reported in ``gaps``.
    """
    times = sampling.times(ledger)
    if times.size < min_times:
        raise ValueError(f"need at least {min_times} sampled times, got {times.size}")
    max_age = int(times.max() - ledger.start)
    total = np.zeros(max_age + 1)
    count = np.zeros(max_age + 1, dtype=np.int64)
    for _, ages, rates in _death_rates(ledger, times):
        np.add.at(total, ages, rates)
        np.add.at(count, ages, 1)
    ages = np.arange(1, max_age + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count[1:] > 0, total[1:] / np.maximum(count[1:], 1), np.nan)
    gaps = ages[count[1:] == 0]
    try:
        fit = powerlaw_fit(ages, mean, windows)
    except PowerLawError:
        fit = None
    return AvgTransition(ages, mean, count[1:], fit, int(times.size), gaps)


def transition_curve(ledger: FlowLedger, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Death rates ``pi_z(t)`` against age ``z`` at a single time."""
    for _, ages, rates in _death_rates(ledger, np.array([t])):
        order = np.argsort(ages)
        return ages[order], rates[order]
    return np.zeros(0, dtype=np.int64), np.zeros(0)


@dataclass(frozen=True)
class AlphaSeries:
    t: np.ndarray
    alpha_mean: np.ndarray
    alpha_std: np.ndarray
    flagged: tuple[int, ...]


def alpha_series(
    ledger: FlowLedger,
    sampling: Sampling = Sampling(),
    windows: Sequence[tuple[int, int]] = DEFAULT_WINDOWS,
) -> AlphaSeries:
    """Nested-window exponent of ``pi_z(t)`` at each sampled time.

    Times where no window has enough positive points are flagged and carry
    NaN; the series continues.
    """
    times = sampling.times(ledger)
    out_t, mean, std, flagged = [], [], [], []
    for t, ages, rates in _death_rates(ledger, times):
        out_t.append(t)
        try:
            fit = powerlaw_fit(ages, rates, windows)
            mean.append(fit.alpha)
            std.append(fit.alpha_std)
        except PowerLawError:
            mean.append(np.nan)
            std.append(np.nan)
            flagged.append(t)
    return AlphaSeries(np.array(out_t, dtype=np.int64), np.array(mean), np.array(std), tuple(flagged))


@dataclass(frozen=True)
class ClusterFit:
    n: int
    slope: float
    intercept: float
    correlation: float


def _line(x: np.ndarray, y: np.ndarray) -> ClusterFit:
    if x.size < 3:
        raise ValueError("a cluster needs at least 3 points")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    syy = np.sum((y - ym) ** 2)
    sxy = np.sum((x - xm) * (y - ym))
    if sxx == 0 or syy == 0:
        raise ValueError("a cluster has zero variance")
    slope = sxy / sxx
    return ClusterFit(int(x.size), float(slope), float(ym - slope * xm), float(sxy / np.sqrt(sxx * syy)))


def alpha_return_regression(
    alpha_t: Sequence[int],
    alpha: Sequence[float],
    return_t: Sequence[int],
    returns: Sequence[float],
    split: int,
) -> tuple[ClusterFit, ClusterFit]:
    """Regress the exponent on mean realized return before and after ``split``.

    Series are aligned on common grid indices; pairs with a missing value on
    either side are dropped. Returns ``(before, after)`` where ``after``
    includes ``split`` itself.
    """
    a = {int(t): float(v) for t, v in zip(alpha_t, alpha) if np.isfinite(v)}
    r = {int(t): float(v) for t, v in zip(return_t, returns) if np.isfinite(v)}
    common = np.array(sorted(set(a) & set(r)), dtype=np.int64)
    if common.size == 0 or not common.min() < split <= common.max():
        raise ValueError("split date must fall inside the aligned range")
    x = np.array([r[t] for t in common])
    y = np.array([a[t] for t in common])
    before = common < split
    return _line(x[before], y[before]), _line(x[~before], y[~before])
