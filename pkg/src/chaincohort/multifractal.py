"""Multifractal moment analysis of a cohort's exchanged-volume measure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cohort import FlowLedger
from .scaling import PowerLawError, powerlaw_fit

DEFAULT_Q: tuple[float, ...] = tuple(float(q) for q in range(-5, 11))
DEFAULT_DT: tuple[int, ...] = tuple(range(1, 51))


class MultifractalError(ValueError):
    pass


@dataclass(frozen=True)
class MfMeasure:
    tau: int
    t: np.ndarray
    v: np.ndarray
    skipped: tuple[int, ...]


def mf_measure(ledger: FlowLedger, tau: int, t_from: int | None = None, t_to: int | None = None) -> MfMeasure:
    """``v_tau(t) = d(tau, t) / V(t)`` for ``tau < t``; steps with ``V(t) = 0`` are skipped."""
    if not ledger.start <= tau < ledger.horizon:
        raise MultifractalError(f"cohort {tau} must lie before the horizon {ledger.horizon}")
    lo = tau + 1 if t_from is None else max(t_from, tau + 1)
    hi = ledger.horizon if t_to is None else min(t_to, ledger.horizon)
    t = np.arange(lo, hi + 1, dtype=np.int64)
    vol = ledger.volumes[t - ledger.start].astype(float)
    flow = np.zeros(t.size)
    dt_, amt = ledger.deaths_of(tau)
    sel = (dt_ >= lo) & (dt_ <= hi)
    flow[dt_[sel] - lo] = amt[sel]
    keep = vol > 0
    return MfMeasure(tau, t[keep], flow[keep] / vol[keep], tuple(int(x) for x in t[~keep]))


def box_measure(v: Sequence[float], dt: int, overlapping: bool = False) -> np.ndarray:
    """Sum of ``v`` over boxes of ``dt`` steps.

    Non-overlapping boxes start at the first sample and a ragged tail is
    dropped; overlapping boxes give the trailing sum at every step from
    ``dt - 1`` on.
    """
    v = np.asarray(v, dtype=float)
    if dt < 1:
        raise MultifractalError("box size must be at least one step")
    if dt > v.size:
        raise MultifractalError(f"box size {dt} exceeds series span {v.size}")
    if overlapping:
        c = np.concatenate(([0.0], np.cumsum(v)))
        return c[dt:] - c[:-dt]
    n = v.size // dt
    return v[: n * dt].reshape(n, dt).sum(axis=1)


@dataclass(frozen=True)
class MfSpectrum:
    tau: int | None
    qs: np.ndarray
    dts: np.ndarray
    moments: np.ndarray  # (len(qs), len(dts))
    excluded: np.ndarray  # zero boxes left out, same shape
    eta: np.ndarray
    r2: np.ndarray
    second_diff: np.ndarray
    concavity: str
    skipped: tuple[int, ...] = ()


def _concavity(qs: np.ndarray, eta: np.ndarray, tol: float = 1e-6) -> tuple[np.ndarray, str]:
    if qs.size < 3:
        return np.zeros(0), "undetermined"
    slopes = np.diff(eta) / np.diff(qs)
    d2 = np.diff(slopes)
    if np.all(np.abs(d2) <= tol):
        return d2, "linear"
    if np.all(d2 <= tol):
        return d2, "concave"
    if np.all(d2 >= -tol):
        return d2, "convex"
    return d2, "mixed"


def moment_spectrum(
    v: Sequence[float],
    qs: Sequence[float] = DEFAULT_Q,
    dts: Sequence[int] = DEFAULT_DT,
    tau: int | None = None,
    skipped: tuple[int, ...] = (),
) -> MfSpectrum:
    """Moments ``M_q(dt)`` as the mean of ``m**q`` over non-overlapping boxes and
    the exponents ``eta(q)`` from a log-log fit of ``M_q`` against ``dt``.

    Box sizes longer than the series are dropped. For ``q <= 0`` empty boxes
    are excluded and counted; an ``(q, dt)`` cell with no usable box is
    left out of the fit.
    """
    v = np.asarray(v, dtype=float)
    qs = np.asarray(qs, dtype=float)
    dts = np.array([d for d in dts if d <= v.size], dtype=np.int64)
    if dts.size < 3:
        raise MultifractalError("fewer than 3 box sizes fit inside the series")
    moments = np.full((qs.size, dts.size), np.nan)
    excluded = np.zeros((qs.size, dts.size), dtype=np.int64)
    for j, dt in enumerate(dts):
        m = box_measure(v, int(dt))
        if not np.any(m > 0):
            raise MultifractalError(f"all boxes are zero at dt={dt}")
        pos = m[m > 0]
        for i, q in enumerate(qs):
            if q <= 0:
                excluded[i, j] = m.size - pos.size
                moments[i, j] = np.mean(pos ** q)
            else:
                moments[i, j] = np.mean(m ** q)
    eta = np.full(qs.size, np.nan)
    r2 = np.full(qs.size, np.nan)
    window = [(int(dts.min()), int(dts.max()))]
    for i in range(qs.size):
        try:
            fit = powerlaw_fit(dts, moments[i], window, min_points=3)
        except PowerLawError as exc:
            raise MultifractalError(f"q={qs[i]:g}: {exc}") from None
        eta[i] = -fit.alpha
        r2[i] = float(fit.r2[0])
    d2, verdict = _concavity(qs, eta)
    return MfSpectrum(tau, qs, dts, moments, excluded, eta, r2, d2, verdict, skipped)


def mf_spectrum(
    ledger: FlowLedger,
    tau: int,
    qs: Sequence[float] = DEFAULT_Q,
    dts: Sequence[int] = DEFAULT_DT,
    t_from: int | None = None,
    t_to: int | None = None,
) -> MfSpectrum:
    meas = mf_measure(ledger, tau, t_from, t_to)
    return moment_spectrum(meas.v, qs, dts, tau=tau, skipped=meas.skipped)
