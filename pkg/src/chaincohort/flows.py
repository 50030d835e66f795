"""Transaction flow fractions into and out of a cohort."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cohort import FlowLedger
from .scaling import DEFAULT_WINDOWS, PowerLawFit, Sampling, powerlaw_fit


@dataclass(frozen=True)
class FlowProfile:
    """Flow fractions anchored at ``t``, indexed by age (``index + 1``).

    ``d_plus[z-1]`` is the share of the step-``t`` flow coming from cohort
    ``t - z``; ``d_minus[z-1]`` is the share of cohort ``t``'s mass spent at
    ``t + z``. Both are normalised by ``V(t) + S(t)``.
    """

    t: int
    denominator: int
    issuance: int
    d_plus: np.ndarray
    d_minus: np.ndarray
    residual: int

    @property
    def empty(self) -> bool:
        return self.denominator == 0

    @property
    def c_plus(self) -> np.ndarray:
        return np.cumsum(self.d_plus)

    @property
    def c_minus(self) -> np.ndarray:
        return np.cumsum(self.d_minus)

    @property
    def issuance_share(self) -> float:
        return self.issuance / self.denominator if self.denominator else math.nan

    @property
    def residual_share(self) -> float:
        return self.residual / self.denominator if self.denominator else math.nan


def flow_profile(ledger: FlowLedger, t: int) -> FlowProfile:
    r = ledger._rel(t)
    s = int(ledger.issuance[r])
    denom = int(ledger.volumes[r]) + s
    plus = np.zeros(r)
    minus = np.zeros(ledger.horizon - t)
    if denom == 0:
        return FlowProfile(t, 0, s, plus, minus, int(ledger.births[r]))
    taus, amounts = ledger.deaths_at(t)
    plus[t - taus - 1] = amounts / denom
    later, out = ledger.deaths_of(t)
    minus[later - t - 1] = out / denom
    residual = int(ledger.births[r]) - int(out.sum())
    return FlowProfile(t, denom, s, plus, minus, residual)


@dataclass(frozen=True)
class IdentityResult:
    ok: bool
    inflow_defect: float
    outflow_defect: float
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def identity_check(profile: FlowProfile, tol: float = 1e-12) -> IdentityResult:
    """Check that in-flow shares plus issuance, and out-flow shares plus
    never-spent mass, each add up to one."""
    if profile.empty:
        return IdentityResult(True, 0.0, 0.0, "empty profile")
    inflow = math.fsum(profile.d_plus.tolist()) + profile.issuance_share - 1.0
    outflow = math.fsum(profile.d_minus.tolist()) + profile.residual_share - 1.0
    problems = []
    if abs(inflow) > tol:
        problems.append(f"in-flow sum off by {inflow:.3g}")
    if abs(outflow) > tol:
        problems.append(f"out-flow sum off by {outflow:.3g}")
    if np.any(profile.d_plus < 0) or np.any(profile.d_minus < 0):
        problems.append("negative flow share")
    return IdentityResult(not problems, inflow, outflow, "; ".join(problems) or "ok")


@dataclass(frozen=True)
class Jump:
    side: str  # "plus" or "minus"
    age: int
    share: float


def jump_report(profile: FlowProfile, threshold: float = 0.02) -> list[Jump]:
    """Ages whose single-step share exceeds ``threshold`` of that side's total."""
    jumps = []
    for side, d in (("plus", profile.d_plus), ("minus", profile.d_minus)):
        total = d.sum()
        if total <= 0:
            continue
        for i in np.flatnonzero(d / total > threshold):
            jumps.append(Jump(side, int(i) + 1, float(d[i] / total)))
    return jumps


@dataclass(frozen=True)
class AveragedFlow:
    ages: np.ndarray
    mean_plus: np.ndarray
    mean_minus: np.ndarray
    n_plus: np.ndarray
    n_minus: np.ndarray
    fit_plus: PowerLawFit
    fit_minus: PowerLawFit
    n_times: int


def _ragged_mean(rows: list[np.ndarray], width: int) -> tuple[np.ndarray, np.ndarray]:
    total = np.zeros(width)
    count = np.zeros(width, dtype=np.int64)
    for row in rows:
        total[: row.size] += row
        count[: row.size] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan), count


def averaged_flow(
    ledger: FlowLedger,
    sampling: Sampling = Sampling(),
    windows_plus: Sequence[tuple[int, int]] = DEFAULT_WINDOWS,
    windows_minus: Sequence[tuple[int, int]] | None = None,
    min_times: int = 20,
    threads: int = 1,
) -> AveragedFlow:
    """Average the in- and out-flow shares over sampled anchors in age coordinates.

    Each age is averaged over the anchors where it exists (ragged tails are
    not zero-padded). Anchors with no flow at all are skipped.
    """
    times = [int(t) for t in sampling.times(ledger, earliest_offset=0)]
    if len(times) < min_times:
        raise ValueError(f"need at least {min_times} sampled times, got {len(times)}")
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            profiles = list(pool.map(lambda t: flow_profile(ledger, t), times))
    else:
        profiles = [flow_profile(ledger, t) for t in times]
    profiles = [p for p in profiles if not p.empty]
    if not profiles:
        raise ValueError("no sampled time carries any flow")
    width = max(max(p.d_plus.size, p.d_minus.size) for p in profiles)
    mean_plus, n_plus = _ragged_mean([p.d_plus for p in profiles], width)
    mean_minus, n_minus = _ragged_mean([p.d_minus for p in profiles], width)
    ages = np.arange(1, width + 1)
    fit_plus = powerlaw_fit(ages, mean_plus, windows_plus)
    fit_minus = powerlaw_fit(ages, mean_minus, windows_minus or windows_plus)
    return AveragedFlow(ages, mean_plus, mean_minus, n_plus, n_minus, fit_plus, fit_minus, len(profiles))
