"""Book-to-market and realized return distributions and profit/loss aggregates."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .cohort import FlowLedger, snapshot_vector
from .ingest import PriceError, PriceSeries


def daily_return(tau: int, t: int, prices: PriceSeries, step_days: float = 1.0) -> float:
    """Per-day log return of a coin bought at ``tau`` and valued at ``t``."""
    if not tau < t:
        raise ValueError("daily return needs tau < t")
    return math.log(prices(t) / prices(tau)) / ((t - tau) * step_days)


@dataclass(frozen=True)
class ReturnDistribution:
    """Weighted sample of per-day log returns (weights in satoshi)."""

    kind: str  # "b2m" or "pnl"
    t: int
    returns: np.ndarray
    weights: np.ndarray
    churn: int = 0

    @property
    def total(self) -> int:
        return int(self.weights.sum())

    @property
    def empty(self) -> bool:
        return self.weights.size == 0

    def cdf_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct returns and the weight fraction at or below each."""
        if self.empty:
            return np.zeros(0), np.zeros(0)
        order = np.argsort(self.returns, kind="stable")
        r = self.returns[order]
        cw = np.cumsum(self.weights[order])
        last = np.concatenate((r[1:] != r[:-1], [True]))
        return r[last], cw[last] / cw[-1]

    def cdf(self, x) -> np.ndarray | float:
        r, c = self.cdf_table()
        i = np.searchsorted(r, np.asarray(x, dtype=float), side="right")
        out = np.where(i > 0, c[np.maximum(i - 1, 0)], 0.0)
        return float(out) if np.ndim(out) == 0 else out


def _returns_from(prices: PriceSeries, taus: np.ndarray, t: int, step_days: float) -> np.ndarray:
    if taus.size and not prices.covers(int(taus.min()), t):
        raise PriceError(f"prices do not cover grid range [{int(taus.min())}, {t}]")
    lp = np.log(prices(taus))
    return (math.log(prices(t)) - lp) / ((t - taus) * step_days)


def b2m_distribution(ledger: FlowLedger, prices: PriceSeries, t: int) -> ReturnDistribution:
    """Unrealized per-day returns of every cohort born before ``t`` and still held."""
    n = snapshot_vector(ledger, t)[:-1]
    idx = np.flatnonzero(n > 0)
    taus = idx + ledger.start
    r = _returns_from(prices, taus, t, ledger.grid.step_days)
    return ReturnDistribution("b2m", t, r, n[idx].copy())


def pnl_distribution(ledger: FlowLedger, prices: PriceSeries, t: int) -> ReturnDistribution:
    """Realized per-day returns of the coins spent at ``t``.

    Same-step churn has no holding period; it is left out of the sample and
    reported as ``churn``. An empty distribution means nothing was traded.
    """
    taus, amounts = ledger.deaths_at(t)
    churn = int(ledger.churn[ledger._rel(t)])
    r = _returns_from(prices, taus, t, ledger.grid.step_days)
    return ReturnDistribution("pnl", t, r, amounts.copy(), churn)


@dataclass(frozen=True)
class Density:
    x: np.ndarray
    f: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.f, self.x))


def _weighted_quantile(x: np.ndarray, w: np.ndarray, q: float) -> float:
    order = np.argsort(x)
    cw = np.cumsum(w[order]) / w.sum()
    return float(x[order][min(np.searchsorted(cw, q), x.size - 1)])


def silverman_bandwidth(dist: ReturnDistribution) -> float:
    x = dist.returns
    w = dist.weights.astype(float)
    n_eff = w.sum() ** 2 / np.sum(w * w)
    mean = np.sum(w * x) / w.sum()
    sd = math.sqrt(max(0.0, float(np.sum(w * (x - mean) ** 2) / w.sum())))
    iqr = _weighted_quantile(x, w, 0.75) - _weighted_quantile(x, w, 0.25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * n_eff ** -0.2


def b2m_density(dist: ReturnDistribution, bandwidth: float | None = None, resolution: int = 8) -> Density:
    """Weighted Gaussian kernel density on a grid spanning six bandwidths past the data.

    The grid step is at most ``bandwidth / resolution``.
    """
    if dist.empty:
        raise ValueError("density of an empty distribution")
    h = silverman_bandwidth(dist) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("zero bandwidth: the sample is degenerate, pass a bandwidth")
    lo, hi = dist.returns.min() - 6 * h, dist.returns.max() + 6 * h
    n = int(math.ceil((hi - lo) / (h / resolution))) + 1
    x = np.linspace(lo, hi, n)
    w = dist.weights.astype(float) / dist.weights.sum()
    f = np.zeros(n)
    for r, wi in zip(dist.returns, w):
        f += wi * np.exp(-0.5 * ((x - r) / h) ** 2)
    f /= h * math.sqrt(2 * math.pi)
    return Density(x, f, h)


@dataclass(frozen=True)
class PLAggregates:
    """Profit/loss summary; conditional means are ``None`` when their side is empty."""

    t: int
    f_p: float
    P: float
    L: float
    Pbar: float | None
    Lbar: float | None


def pl_aggregates(dist: ReturnDistribution) -> PLAggregates:
    """Fraction in profit and profit/loss integrals as exact weighted sums.

    Break-even mass (return exactly 0) is not in profit and sits on the loss
    side with zero loss.
    """
    if dist.empty:
        raise ValueError("aggregates of an empty distribution")
    w = dist.weights.astype(float)
    total = w.sum()
    gain = dist.returns > 0
    wp, wl = w[gain].sum(), w[~gain].sum()
    sp = float(np.sum(w[gain] * dist.returns[gain]))
    sl = 0.0 - float(np.sum(w[~gain] * dist.returns[~gain]))
    f_p = wp / total
    return PLAggregates(
        t=dist.t,
        f_p=float(f_p),
        P=sp / total,
        L=sl / total,
        Pbar=sp / wp if wp > 0 else None,
        Lbar=sl / wl if wl > 0 else None,
    )


AGG_FIELDS = ("f_p", "P", "L", "Pbar", "Lbar")


@dataclass(frozen=True)
class AggregateSeries:
    t: np.ndarray
    values: np.ndarray  # (len(t), 5), NaN where undefined
    moving_mean: np.ndarray
    moving_median: np.ndarray
    window_steps: int
    skipped: tuple[int, ...] = field(default=())

    def column(self, name: str) -> np.ndarray:
        return self.values[:, AGG_FIELDS.index(name)]


def centered_moving(values: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered moving mean and median ignoring NaN; NaN where the window leaves the series."""
    mean = np.full(values.shape, np.nan)
    median = np.full(values.shape, np.nan)
    n = values.shape[0]
    if window > n:
        return mean, median
    back = (window - 1) // 2
    blocks = sliding_window_view(values, window, axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN windows stay NaN
        mean[back: back + blocks.shape[0]] = np.nanmean(blocks, axis=-1)
        median[back: back + blocks.shape[0]] = np.nanmedian(blocks, axis=-1)
    return mean, median


def realized_aggregates_series(
    ledger: FlowLedger,
    prices: PriceSeries,
    window_days: float = 90.0,
) -> AggregateSeries:
    """Profit/loss aggregates of the realized distribution at every step.

    Steps with no trade, or with prices missing for a traded cohort, are
    skipped (NaN row) and listed.
    """
    rows, skipped = [], []
    ts = np.arange(ledger.start, ledger.horizon + 1, dtype=np.int64)
    for t in ts:
        try:
            dist = pnl_distribution(ledger, prices, int(t))
        except PriceError:
            dist = None
        if dist is None or dist.empty:
            skipped.append(int(t))
            rows.append([np.nan] * len(AGG_FIELDS))
            continue
        agg = pl_aggregates(dist)
        rows.append([np.nan if getattr(agg, k) is None else getattr(agg, k) for k in AGG_FIELDS])
    values = np.array(rows, dtype=float).reshape(-1, len(AGG_FIELDS))
    window = max(1, int(round(window_days / ledger.grid.step_days)))
    mean, median = centered_moving(values, window)
    return AggregateSeries(ts, values, mean, median, window, tuple(skipped))
