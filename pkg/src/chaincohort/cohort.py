"""Cohort bookkeeping: births, deaths and issuance per grid step.

Every output is a birth at the grid index of its block; every spent output
is a death flow from its birth index to the spend index. Same-step churn
(created and spent inside one interval) is kept on a separate diagonal so
that ``births[t] = issuance[t] + volume[t]`` holds exactly.

All quantities are integer satoshi. Grid indices in the public API are
absolute (``TimeGrid`` indices); arrays are stored relative to ``start``.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .ingest import OutPoint, TimeGrid, TxRecord, sample_time

_MAGIC = b"CCFL"
_VERSION = 1


class HorizonError(IndexError):
    pass


class CacheFormatError(ValueError):
    pass


def _frozen(a, dtype=np.int64) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FlowLedger:
    """Aggregated flows of a parsed ledger.

    Attributes:
        grid: analysis grid.
        start: absolute grid index of the first populated step.
        issuance: net new coins per step, ``S(t)`` (coinbase outputs minus
            fees paid by that step's transactions).
        coinbase: gross coinbase outputs per step.
        births: ``n_t(t)``, mass born at ``t`` that survives the step.
        churn: mass created and spent inside the same step, ``d(t, t)``.
        heights: highest block height seen per step (-1 if none).
        death_tau, death_t, death_amount: off-diagonal death flows
            ``d(tau, t)``, relative indices, sorted by ``(t, tau)``.
    """

    grid: TimeGrid
    start: int
    issuance: np.ndarray
    coinbase: np.ndarray
    births: np.ndarray
    churn: np.ndarray
    heights: np.ndarray
    death_tau: np.ndarray
    death_t: np.ndarray
    death_amount: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("issuance", "coinbase", "births", "churn", "heights",
                     "death_tau", "death_t", "death_amount"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    # -- shape -----------------------------------------------------------
    @property
    def length(self) -> int:
        return int(self.issuance.size)

    @property
    def horizon(self) -> int:
        return self.start + self.length - 1

    @property
    def empty(self) -> bool:
        return self.length == 0

    def _rel(self, t: int) -> int:
        if self.empty or t < self.start or t > self.horizon:
            raise HorizonError(f"grid index {t} outside ledger range [{self.start}, {self.horizon}]")
        return t - self.start

    # -- sparse access ----------------------------------------------------
    @cached_property
    def _t_ptr(self) -> np.ndarray:
        return np.searchsorted(self.death_t, np.arange(self.length + 1))

    @cached_property
    def _by_tau(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        order = np.lexsort((self.death_t, self.death_tau))
        tau, t, amt = self.death_tau[order], self.death_t[order], self.death_amount[order]
        ptr = np.searchsorted(tau, np.arange(self.length + 1))
        return tau, t, amt, ptr

    def deaths_at(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Off-diagonal deaths spent at ``t``: (absolute tau array, amounts)."""
        r = self._rel(t)
        lo, hi = self._t_ptr[r], self._t_ptr[r + 1]
        return self.death_tau[lo:hi] + self.start, self.death_amount[lo:hi]

    def deaths_of(self, tau: int) -> tuple[np.ndarray, np.ndarray]:
        """Deaths of cohort ``tau`` at later steps: (absolute t array, amounts)."""
        r = self._rel(tau)
        _, t, amt, ptr = self._by_tau
        return t[ptr[r]:ptr[r + 1]] + self.start, amt[ptr[r]:ptr[r + 1]]

    def death(self, tau: int, t: int) -> int:
        if tau == t:
            return int(self.churn[self._rel(t)])
        taus, amts = self.deaths_at(t)
        hit = np.searchsorted(taus, tau)
        if hit < taus.size and taus[hit] == tau:
            return int(amts[hit])
        return 0

    # -- aggregates -------------------------------------------------------
    @cached_property
    def volumes(self) -> np.ndarray:
        """``V(t)`` for every step (diagonal excluded)."""
        return _frozen(_int_bincount(self.death_t, self.death_amount, self.length))

    @cached_property
    def supply(self) -> np.ndarray:
        """``N(t)`` as the running sum of issuance."""
        return _frozen(np.cumsum(self.issuance))

    def volume(self, t: int) -> int:
        return int(self.volumes[self._rel(t)])

    def total_supply(self, t: int) -> int:
        return int(self.supply[self._rel(t)])

    def residual(self) -> np.ndarray:
        """Mass of each cohort still unspent at the horizon (``n*``)."""
        spent = _int_bincount(self.death_tau, self.death_amount, self.length)
        return self.births - spent

    def iter_states(self, until: int | None = None) -> Iterator[tuple[int, np.ndarray]]:
        """Yield ``(t, n)`` with ``n[r] = n_{start+r}(t)`` for every step in order.

        The yielded array is reused between iterations; copy it to keep it.
        """
        if self.empty:
            return
        last = self.length - 1 if until is None else self._rel(until)
        n = np.zeros(self.length, dtype=np.int64)
        ptr = self._t_ptr
        for r in range(last + 1):
            lo, hi = ptr[r], ptr[r + 1]
            np.subtract.at(n, self.death_tau[lo:hi], self.death_amount[lo:hi])
            n[r] = self.births[r]
            yield self.start + r, n[: r + 1]

    def with_arrays(self, **changes) -> "FlowLedger":
        """Copy with some arrays replaced (used for fault-injection tests)."""
        fields = dict(grid=self.grid, start=self.start, issuance=self.issuance,
                      coinbase=self.coinbase, births=self.births, churn=self.churn,
                      heights=self.heights, death_tau=self.death_tau,
                      death_t=self.death_t, death_amount=self.death_amount)
        fields.update(changes)
        return FlowLedger(**fields)

    def __eq__(self, other):
        if not isinstance(other, FlowLedger):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.start == other.start
            and all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("issuance", "coinbase", "births", "churn", "heights",
                              "death_tau", "death_t", "death_amount"))
        )

    __hash__ = None


def _int_bincount(idx: np.ndarray, weights: np.ndarray, length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.int64)
    np.add.at(out, idx, weights)
    return out


def empty_ledger(grid: TimeGrid | None = None) -> FlowLedger:
    z = np.zeros(0, dtype=np.int64)
    return FlowLedger(grid or TimeGrid(), 0, z, z, z, z, z, z, z, z)


def build_flow_ledger(records: Sequence[TxRecord], grid: TimeGrid | None = None) -> FlowLedger:
    """Fold a validated transaction sequence into a :class:`FlowLedger`.

    Block times are mapped with :func:`sample_time`; a block whose time is
    earlier than a preceding block's is assigned the running maximum index
    so no coin is spent before it is born.
    """
    grid = grid or TimeGrid()
    if not records:
        return empty_ledger(grid)

    step_of: list[int] = []
    cur = -1
    for tx in records:
        cur = max(cur, sample_time(tx.block_time, grid))
        step_of.append(cur)
    start = step_of[0]
    length = step_of[-1] - start + 1

    coinbase = np.zeros(length, dtype=np.int64)
    fees = np.zeros(length, dtype=np.int64)
    created = np.zeros(length, dtype=np.int64)
    churn = np.zeros(length, dtype=np.int64)
    heights = np.full(length, -1, dtype=np.int64)
    deaths: dict[tuple[int, int], int] = {}
    born: dict[OutPoint, tuple[int, int]] = {}

    for tx, step in zip(records, step_of):
        r = step - start
        heights[r] = max(heights[r], tx.block_height)
        out_total = sum(tx.outputs)
        created[r] += out_total
        if tx.coinbase:
            coinbase[r] += out_total
        else:
            in_total = 0
            for o in tx.inputs:
                b, amount = born.pop(o)
                in_total += amount
                if b == r:
                    churn[r] += amount
                else:
                    deaths[(r, b)] = deaths.get((r, b), 0) + amount
            fees[r] += in_total - out_total
        for vout, amount in enumerate(tx.outputs):
            born[OutPoint(tx.txid, vout)] = (r, amount)

    keys = sorted(deaths)
    death_t = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
    death_tau = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
    death_amount = np.fromiter((deaths[k] for k in keys), dtype=np.int64, count=len(keys))
    return FlowLedger(
        grid=grid,
        start=start,
        issuance=coinbase - fees,
        coinbase=coinbase,
        births=created - churn,
        churn=churn,
        heights=heights,
        death_tau=death_tau,
        death_t=death_t,
        death_amount=death_amount,
    )


@dataclass(frozen=True)
class AgeSnapshot:
    t: int
    cohorts: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.cohorts.values())


def snapshot_vector(ledger: FlowLedger, t: int) -> np.ndarray:
    """``n_tau(t)`` for ``tau = start .. t`` as an int64 array (cached)."""
    r = ledger._rel(t)
    cached = ledger._cache.get(("snap", t))
    if cached is not None:
        return cached
    hi = ledger._t_ptr[r + 1]
    spent = _int_bincount(ledger.death_tau[:hi], ledger.death_amount[:hi], r + 1)
    n = _frozen(ledger.births[: r + 1] - spent)
    if len(ledger._cache) < 64:
        ledger._cache[("snap", t)] = n
    return n


def age_snapshot(ledger: FlowLedger, t: int) -> AgeSnapshot:
    n = snapshot_vector(ledger, t)
    nz = np.flatnonzero(n)
    return AgeSnapshot(t, {int(ledger.start + i): int(n[i]) for i in nz})


def volume(ledger: FlowLedger, t: int) -> int:
    return ledger.volume(t)


def transition_probability(ledger: FlowLedger, tau: int, t: int) -> float | None:
    """Fraction of cohort ``tau``'s surviving mass spent during step ``t``.

    Returns ``None`` when the cohort was already empty at ``t - 1``.
    """
    if not tau < t:
        raise ValueError("transition probability needs tau < t")
    prev = snapshot_vector(ledger, t - 1)
    held = int(prev[ledger._rel(tau)])
    if held == 0:
        return None
    return ledger.death(tau, t) / held


@dataclass(frozen=True)
class Violation:
    t: int
    identity: str
    detail: str


@dataclass(frozen=True)
class ConservationReport:
    steps_checked: int
    violation: Violation | None = None

    @property
    def ok(self) -> bool:
        return self.violation is None

    def __str__(self) -> str:
        if self.ok:
            return f"conservation OK ({self.steps_checked} steps)"
        v = self.violation
        return f"conservation FAILED at t={v.t} [{v.identity}]: {v.detail}"


def conservation_report(ledger: FlowLedger) -> ConservationReport:
    """Check the cohort conservation identities at every step.

    Verified per step ``t``: non-negative flows, births equal issuance plus
    volume, ``N(t) = N(t-1) + S(t)`` with ``N`` recomputed from the age
    distribution, and the age distribution total equals cumulative issuance.
    """
    if ledger.empty:
        return ConservationReport(0)
    negative = np.flatnonzero(ledger.death_amount < 0)
    if negative.size:
        t = int(ledger.death_t[negative[0]]) + ledger.start
        return ConservationReport(0, Violation(t, "non-negative flows", "negative death flow"))
    if np.any(ledger.churn < 0):
        t = int(np.flatnonzero(ledger.churn < 0)[0]) + ledger.start
        return ConservationReport(0, Violation(t, "non-negative flows", "negative churn"))
    if np.any(ledger.death_tau >= ledger.death_t):
        r = int(np.flatnonzero(ledger.death_tau >= ledger.death_t)[0])
        return ConservationReport(
            0, Violation(int(ledger.death_t[r]) + ledger.start, "causality", "death before birth"))

    volumes = ledger.volumes
    prev_total = 0
    cum_issuance = 0
    for t, n in ledger.iter_states():
        r = t - ledger.start
        s = int(ledger.issuance[r])
        cum_issuance += s
        if int(ledger.births[r]) != s + int(volumes[r]):
            return ConservationReport(r, Violation(
                t, "births = issuance + volume",
                f"n_t(t)={int(ledger.births[r])} but S+V={s + int(volumes[r])}"))
        if n.min() < 0:
            tau = int(np.flatnonzero(n < 0)[0]) + ledger.start
            return ConservationReport(r, Violation(
                t, "non-negative residual", f"cohort {tau} overspent"))
        total = int(n.sum())
        if total != prev_total + s:
            return ConservationReport(r, Violation(
                t, "N(t) = N(t-1) + S(t)", f"{total} != {prev_total} + {s}"))
        if total != cum_issuance:
            return ConservationReport(r, Violation(
                t, "sum of age distribution = cumulative issuance", f"{total} != {cum_issuance}"))
        prev_total = total
    return ConservationReport(ledger.length)


# -- binary cache ---------------------------------------------------------
#
# Layout (little-endian):
#   magic "CCFL" | u32 version | i64 epoch | i64 step | i64 start
#   | i64 length | i64 n_deaths
#   | length x i64: issuance, coinbase, births, churn, heights
#   | n_deaths x i64: death_tau, death_t, death_amount
#   | u32 crc32 of everything before it

_HEADER = struct.Struct("<4sIqqqqq")


def cache_bytes(ledger: FlowLedger) -> bytes:
    parts = [_HEADER.pack(_MAGIC, _VERSION, ledger.grid.epoch, ledger.grid.step,
                          ledger.start, ledger.length, ledger.death_amount.size)]
    for name in ("issuance", "coinbase", "births", "churn", "heights",
                 "death_tau", "death_t", "death_amount"):
        parts.append(getattr(ledger, name).astype("<i8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def ledger_from_cache_bytes(data: bytes) -> FlowLedger:
    if len(data) < _HEADER.size + 4:
        raise CacheFormatError("cache file truncated")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CacheFormatError("cache checksum mismatch")
    magic, version, epoch, step, start, length, nd = _HEADER.unpack_from(body)
    if magic != _MAGIC:
        raise CacheFormatError("not a flow ledger cache")
    if version != _VERSION:
        raise CacheFormatError(f"unsupported cache version {version}")
    expected = _HEADER.size + 8 * (5 * length + 3 * nd)
    if len(body) != expected:
        raise CacheFormatError("cache length does not match header")
    arrays = []
    off = _HEADER.size
    for count in (length,) * 5 + (nd,) * 3:
        arrays.append(np.frombuffer(body, dtype="<i8", count=count, offset=off).astype(np.int64))
        off += 8 * count
    return FlowLedger(TimeGrid(epoch, step), start, *arrays)


def save_ledger(ledger: FlowLedger, path) -> None:
    with open(path, "wb") as fh:
        fh.write(cache_bytes(ledger))


def load_ledger(path) -> FlowLedger:
    with open(path, "rb") as fh:
        return ledger_from_cache_bytes(fh.read())
