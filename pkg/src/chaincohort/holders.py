"""Short/medium/long-term holder fractions and their volume counterparts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cohort import FlowLedger


@dataclass(frozen=True)
class HolderBands:
    """Age bands in days: ``[0, b0], (b0, b1], ..., (b_last, inf)``."""

    boundaries: tuple[float, ...] = (30.0, 365.0)
    names: tuple[str, ...] = ("short", "medium", "long")

    def __post_init__(self):
        b = tuple(float(x) for x in self.boundaries)
        if not b or b[0] < 0 or any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("band boundaries must be non-negative and strictly increasing")
        object.__setattr__(self, "boundaries", b)
        if len(self.names) != len(b) + 1:
            object.__setattr__(self, "names", tuple(f"band{i}" for i in range(len(b) + 1)))

    def max_steps(self, step_days: float) -> np.ndarray:
        """Largest age in grid steps that still falls in each bounded band."""
        return np.floor(np.array(self.boundaries) / step_days + 1e-9).astype(np.int64)


@dataclass(frozen=True)
class FractionSeries:
    t: np.ndarray
    values: np.ndarray  # (len(t), n_bands)
    names: tuple[str, ...]
    skipped: tuple[int, ...] = field(default=())

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


def _band_sums(mass_by_age: np.ndarray, limits: np.ndarray) -> np.ndarray:
    """Sum ``mass_by_age[z]`` (``z`` = age in steps) into bands closed on the right."""
    c = np.concatenate(([0], np.cumsum(mass_by_age)))
    cut = np.minimum(limits + 1, mass_by_age.size)
    edges = np.concatenate(([0], cut, [mass_by_age.size]))
    return c[edges[1:]] - c[edges[:-1]]


def holder_fractions(ledger: FlowLedger, bands: HolderBands = HolderBands()) -> FractionSeries:
    """Share of outstanding supply held in each age band at every step."""
    limits = bands.max_steps(ledger.grid.step_days)
    ts, rows, skipped = [], [], []
    for t, n in ledger.iter_states():
        total = int(n.sum())
        if total == 0:
            skipped.append(t)
            continue
        sums = _band_sums(n[::-1], limits)
        ts.append(t)
        rows.append(sums / total)
    return FractionSeries(np.array(ts, dtype=np.int64), np.array(rows).reshape(-1, len(bands.names)),
                          bands.names, tuple(skipped))


def volume_fractions(ledger: FlowLedger, bands: HolderBands = HolderBands()) -> FractionSeries:
    """Share of traded volume by the age band of the coins spent.

    Same-step churn has age 0 and counts in the first band; it is also part of
    the denominator so that the shares add up to one.
    """
    limits = bands.max_steps(ledger.grid.step_days)
    ts, rows, skipped = [], [], []
    for r in range(ledger.length):
        t = ledger.start + r
        taus, amounts = ledger.deaths_at(t)
        total = int(amounts.sum()) + int(ledger.churn[r])
        if total == 0:
            skipped.append(t)
            continue
        by_age = np.zeros(r + 1, dtype=np.int64)
        by_age[t - taus] = amounts
        by_age[0] = ledger.churn[r]
        ts.append(t)
        rows.append(_band_sums(by_age, limits) / total)
    return FractionSeries(np.array(ts, dtype=np.int64), np.array(rows).reshape(-1, len(bands.names)),
                          bands.names, tuple(skipped))


def diff_series(series: FractionSeries) -> FractionSeries:
    """First differences between consecutive rows, labelled by the later time."""
    if series.t.size < 2:
        raise ValueError("differencing needs at least 2 points")
    return FractionSeries(series.t[1:], np.diff(series.values, axis=0), series.names)


@dataclass(frozen=True)
class CorrMatrix:
    matrix: np.ndarray
    undefined: tuple[tuple[int, int], ...]


def corr_matrix(series: Sequence[Sequence[float]]) -> CorrMatrix:
    """Pearson correlation matrix; entries involving a zero-variance series are NaN."""
    x = np.array([np.asarray(s, dtype=float) for s in series])
    if x.ndim != 2:
        raise ValueError("series must have equal lengths")
    if x.shape[1] < 3:
        raise ValueError("correlation needs at least 3 points")
    xc = x - x.mean(axis=1, keepdims=True)
    ss = np.sqrt(np.einsum("ij,ij->i", xc, xc))
    flat = ss <= 1e-15 * np.maximum(1.0, np.abs(x).max(axis=1)) * np.sqrt(x.shape[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        m = (xc @ xc.T) / np.outer(ss, ss)
    m = np.clip((m + m.T) / 2, -1.0, 1.0)
    np.fill_diagonal(m, 1.0)
    m[flat, :] = np.nan
    m[:, flat] = np.nan
    bad = tuple((int(i), int(j)) for i, j in zip(*np.nonzero(np.isnan(m))))
    return CorrMatrix(m, bad)
