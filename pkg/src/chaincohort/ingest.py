"""Transaction-stream and price ingestion.

The ledger format is JSON Lines, one transaction per line::

    {"txid": "a", "height": 0, "time": 1231006505,
     "inputs": [], "outputs": [5000000000], "coinbase": true}

Inputs are ``{"txid", "vout"}`` references to earlier outputs. Amounts are
integer satoshi. The parser enforces UTXO discipline (no double spends, no
dangling references) in a single sequential pass.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import IO, Iterable, Iterator, NamedTuple

import numpy as np

SATOSHI_PER_BTC = 100_000_000
DAY = 86_400

_LEDGER_FIELDS = ("txid", "height", "time", "inputs", "outputs", "coinbase")


class LedgerError(Exception):
    """Base class for ledger validation failures."""


class MalformedLineError(LedgerError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class DoubleSpendError(LedgerError):
    def __init__(self, outpoint: "OutPoint", line_no: int):
        self.outpoint = outpoint
        super().__init__(f"line {line_no}: double spend of outpoint ({outpoint.txid}, {outpoint.vout})")


class DanglingReferenceError(LedgerError):
    def __init__(self, outpoint: "OutPoint", line_no: int):
        self.outpoint = outpoint
        super().__init__(f"line {line_no}: unknown outpoint ({outpoint.txid}, {outpoint.vout})")


class HeightOrderError(LedgerError):
    pass


class ValueConservationError(LedgerError):
    pass


class PriceError(ValueError):
    pass


class OutPoint(NamedTuple):
    txid: str
    vout: int


@dataclass(frozen=True)
class TxRecord:
    txid: str
    block_height: int
    block_time: int
    inputs: tuple[OutPoint, ...]
    outputs: tuple[int, ...]
    coinbase: bool

    def to_json(self) -> str:
        obj = {
            "txid": self.txid,
            "height": self.block_height,
            "time": self.block_time,
            "inputs": [{"txid": o.txid, "vout": o.vout} for o in self.inputs],
            "outputs": list(self.outputs),
            "coinbase": self.coinbase,
        }
        return json.dumps(obj, separators=(",", ":"))


@dataclass(frozen=True)
class TimeGrid:
    """Discrete analysis grid ``t_i = epoch + i * step`` (both in Unix seconds)."""

    epoch: int = 0
    step: int = DAY

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("grid step must be positive")

    @property
    def step_days(self) -> float:
        return self.step / DAY

    def time_of(self, index: int) -> int:
        return self.epoch + index * self.step

    def index_of_date(self, value: str | date) -> int:
        """Grid index of a calendar date (midnight UTC), rounded up like any timestamp."""
        if isinstance(value, str):
            value = date.fromisoformat(value)
        ts = int(datetime(value.year, value.month, value.day, tzinfo=timezone.utc).timestamp())
        return sample_time(ts, self)

    def label(self, index: int) -> str:
        ts = self.time_of(index)
        dt = datetime.fromtimestamp(ts, tz=timezone.utc)
        if ts % DAY == 0:
            return dt.date().isoformat()
        return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def sample_time(timestamp: int, grid: TimeGrid) -> int:
    """Map a timestamp to the smallest grid index whose time is >= it.

    Timestamps exactly on a boundary map to that boundary; anything inside
    ``(t_{i-1}, t_i]`` is rounded up to ``i`` so no quantity looks ahead.
    """
    offset = timestamp - grid.epoch
    if offset < 0:
        raise ValueError(f"timestamp {timestamp} precedes grid epoch {grid.epoch}")
    return -(-offset // grid.step)


@dataclass
class UtxoSet:
    """Outstanding outputs keyed by outpoint."""

    unspent: dict[OutPoint, int] = field(default_factory=dict)
    _spent: set[OutPoint] = field(default_factory=set)

    def add(self, tx: TxRecord) -> None:
        for vout, amount in enumerate(tx.outputs):
            self.unspent[OutPoint(tx.txid, vout)] = amount

    def spend(self, outpoint: OutPoint, line_no: int = 0) -> int:
        amount = self.unspent.pop(outpoint, None)
        if amount is None:
            if outpoint in self._spent:
                raise DoubleSpendError(outpoint, line_no)
            raise DanglingReferenceError(outpoint, line_no)
        self._spent.add(outpoint)
        return amount

    def total(self) -> int:
        return sum(self.unspent.values())


def _lines(stream) -> Iterator[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for raw in stream:
        yield raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw


def _parse_record(line: str, line_no: int) -> TxRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLineError(line_no, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise MalformedLineError(line_no, "expected a JSON object")
    missing = [k for k in _LEDGER_FIELDS if k not in obj]
    if missing:
        raise MalformedLineError(line_no, f"missing field(s) {', '.join(missing)}")
    txid, height, ts = obj["txid"], obj["height"], obj["time"]
    if not isinstance(txid, str) or not txid:
        raise MalformedLineError(line_no, "txid must be a non-empty string")
    for name, val in (("height", height), ("time", ts)):
        if not isinstance(val, int) or isinstance(val, bool) or val < 0:
            raise MalformedLineError(line_no, f"{name} must be a non-negative integer")
    if not isinstance(obj["coinbase"], bool):
        raise MalformedLineError(line_no, "coinbase must be a boolean")
    if not isinstance(obj["inputs"], list) or not isinstance(obj["outputs"], list):
        raise MalformedLineError(line_no, "inputs and outputs must be lists")

    inputs = []
    for ref in obj["inputs"]:
        if (
            not isinstance(ref, dict)
            or not isinstance(ref.get("txid"), str)
            or not isinstance(ref.get("vout"), int)
            or isinstance(ref.get("vout"), bool)
            or ref["vout"] < 0
        ):
            raise MalformedLineError(line_no, "input must be {txid: str, vout: int >= 0}")
        inputs.append(OutPoint(ref["txid"], ref["vout"]))
    outputs = obj["outputs"]
    for amount in outputs:
        if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
            raise MalformedLineError(line_no, "output amounts must be positive integers")
    if not outputs:
        raise MalformedLineError(line_no, "transaction has no outputs")
    coinbase = obj["coinbase"]
    if coinbase and inputs:
        raise MalformedLineError(line_no, "coinbase transaction with inputs")
    if not coinbase and not inputs:
        raise MalformedLineError(line_no, "non-coinbase transaction without inputs")
    return TxRecord(txid, height, ts, tuple(inputs), tuple(outputs), coinbase)


def parse_ledger(stream, grid: TimeGrid | None = None) -> list[TxRecord]:
    """Parse and validate a JSON Lines transaction stream.

    Lines are processed in file order, so a transaction may spend outputs
    created earlier in the same block. Blank lines are ignored.

    Raises:
        MalformedLineError: unparseable line or schema violation.
        DoubleSpendError: input refers to an already spent outpoint.
        DanglingReferenceError: input refers to an unknown outpoint.
        HeightOrderError: block heights decrease.
        ValueConservationError: outputs exceed inputs.
    """
    grid = grid or TimeGrid()
    records: list[TxRecord] = []
    utxos = UtxoSet()
    seen: set[str] = set()
    last_height = -1
    for line_no, line in enumerate(_lines(stream), start=1):
        if not line.strip():
            continue
        tx = _parse_record(line, line_no)
        if tx.block_height < last_height:
            raise HeightOrderError(
                f"line {line_no}: block height {tx.block_height} after {last_height}"
            )
        if tx.block_time < grid.epoch:
            raise MalformedLineError(line_no, "block time precedes the grid epoch")
        if tx.txid in seen:
            raise MalformedLineError(line_no, f"duplicate txid {tx.txid!r}")
        last_height = tx.block_height
        if not tx.coinbase:
            if len(set(tx.inputs)) != len(tx.inputs):
                dup = next(o for o in tx.inputs if tx.inputs.count(o) > 1)
                raise DoubleSpendError(dup, line_no)
            spent = sum(utxos.spend(o, line_no) for o in tx.inputs)
            if sum(tx.outputs) > spent:
                raise ValueConservationError(
                    f"line {line_no}: outputs {sum(tx.outputs)} exceed inputs {spent}"
                )
        seen.add(tx.txid)
        utxos.add(tx)
        records.append(tx)
    return records


def replay_utxos(records: Iterable[TxRecord]) -> dict[OutPoint, int]:
    """UTXO set left after applying ``records`` in order."""
    utxos = UtxoSet()
    for tx in records:
        for o in tx.inputs:
            utxos.spend(o)
        utxos.add(tx)
    return utxos.unspent


def dump_ledger(records: Iterable[TxRecord], stream: IO[str]) -> None:
    for tx in records:
        stream.write(tx.to_json())
        stream.write("\n")


def ledger_to_bytes(records: Iterable[TxRecord]) -> bytes:
    buf = io.StringIO()
    dump_ledger(records, buf)
    return buf.getvalue().encode("utf-8")


@dataclass(frozen=True)
class PriceSeries:
    """Close prices (USD/BTC) on a contiguous range of grid indices."""

    start: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise PriceError("price series must be a non-empty 1-d array")
        if not np.all(values > 0):
            raise PriceError("prices must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def end(self) -> int:
        return self.start + self.values.size - 1

    def covers(self, lo: int, hi: int) -> bool:
        return self.start <= lo and hi <= self.end

    def __call__(self, index):
        idx = np.asarray(index)
        if np.any(idx < self.start) or np.any(idx > self.end):
            raise PriceError(
                f"price requested outside covered range [{self.start}, {self.end}]"
            )
        out = self.values[idx - self.start]
        return float(out) if np.ndim(out) == 0 else out


def load_prices(stream, grid: TimeGrid | None = None) -> PriceSeries:
    """Read ``date,close_usd`` rows onto the grid.

    Several rows falling in one grid interval are allowed when the grid is
    coarser than the file; the latest date in the interval wins (it is the
    close nearest the grid time). The covered index range must be gap free.
    """
    grid = grid or TimeGrid()
    reader = csv.reader(_lines(stream))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["date", "close_usd"]:
        raise PriceError("price file must start with header 'date,close_usd'")
    by_index: dict[int, tuple[date, float]] = {}
    seen_dates: set[date] = set()
    for row_no, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise PriceError(f"row {row_no}: expected 2 columns, got {len(row)}")
        try:
            d = date.fromisoformat(row[0].strip())
            price = float(row[1])
        except ValueError:
            raise PriceError(f"row {row_no}: unparseable row {row!r}") from None
        if not math.isfinite(price) or price <= 0:
            raise PriceError(f"row {row_no}: non-positive price {row[1].strip()}")
        if d in seen_dates:
            raise PriceError(f"row {row_no}: duplicate date {d}")
        seen_dates.add(d)
        idx = grid.index_of_date(d)
        prev = by_index.get(idx)
        if prev is None or d > prev[0]:
            by_index[idx] = (d, price)
    if not by_index:
        raise PriceError("price file has no rows")
    lo, hi = min(by_index), max(by_index)
    missing = [i for i in range(lo, hi + 1) if i not in by_index]
    if missing:
        raise PriceError(
            f"price coverage has {len(missing)} gap(s), first at {grid.label(missing[0])}"
        )
    return PriceSeries(lo, np.array([by_index[i][1] for i in range(lo, hi + 1)]))


def write_prices(prices: PriceSeries, grid: TimeGrid, stream: IO[str]) -> None:
    stream.write("date,close_usd\n")
    for i, p in enumerate(prices.values):
        stream.write(f"{grid.label(prices.start + i)},{p:.12g}\n")
