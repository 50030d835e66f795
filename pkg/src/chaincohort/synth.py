"""Synthetic ledgers with known holding-time laws.

The generator mints ``S(t)`` each step and lets every cohort die according to
an age-dependent death rate ``pi(z)``. A cohort's whole future is drawn when it
is born: its mass is split multinomially over future death steps (using the
survival-weighted death rates) and each part becomes one output that is spent
at its scheduled step. Conditional on the surviving mass, the amount spent
from a cohort at each step is therefore binomial with the target rate, while
the number of outputs stays bounded by the horizon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .ingest import DAY, OutPoint, PriceSeries, TimeGrid, TxRecord

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


@dataclass
class SynthConfig:
    """Parameters of a synthetic ledger.

    ``alpha`` gives ``pi(z) ∝ z**-alpha`` normalised over ``1..horizon_steps``
    (``math.inf`` puts all mass at ``z = 1``). ``pi_table`` overrides it with
    explicit death rates per age; ages absent from the table never die.
    ``alpha_schedule`` switches the exponent at given steps.
    """

    horizon_steps: int
    alpha: float | None = 0.87
    issuance_per_step: int | Sequence[int] = 5_000
    seed: int = 0
    granularity: int = 1
    pi_table: Mapping[int, float] | None = None
    alpha_schedule: Sequence[tuple[int, float]] | None = None
    step_days: int = 1
    start_date: str = "2010-01-01"
    txs_per_step: int = 1

    def __post_init__(self):
        if self.horizon_steps < 2:
            raise ValueError("horizon_steps must be >= 2")
        if self.pi_table is None and self.alpha_schedule is None:
            if self.alpha is None or not self.alpha > 0:
                raise ValueError("alpha must be > 0")
        for _, a in self.alpha_schedule or ():
            if not a > 0:
                raise ValueError("alpha must be > 0")
        if self.pi_table is not None:
            self.pi_table = {int(k): float(v) for k, v in self.pi_table.items()}
            if any(k < 1 or not 0.0 <= v <= 1.0 for k, v in self.pi_table.items()):
                raise ValueError("pi_table needs ages >= 1 and rates in [0, 1]")
        if self.granularity < 1 or self.txs_per_step < 1 or self.step_days < 1:
            raise ValueError("granularity, txs_per_step and step_days must be >= 1")
        if not isinstance(self.issuance_per_step, int):
            self.issuance_per_step = [int(s) for s in self.issuance_per_step]
            if len(self.issuance_per_step) != self.horizon_steps:
                raise ValueError("issuance schedule length must equal horizon_steps")
            if min(self.issuance_per_step) < 0:
                raise ValueError("issuance must be non-negative")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(0, self.step_days * DAY)

    @property
    def first_index(self) -> int:
        return self.grid.index_of_date(self.start_date)

    def issuance(self, t: int) -> int:
        if isinstance(self.issuance_per_step, int):
            return self.issuance_per_step
        return self.issuance_per_step[t]

    def hazard(self, when: np.ndarray, age: np.ndarray) -> np.ndarray:
        """Death rate for coins of age ``age`` during generator step ``when``."""
        age = np.asarray(age, dtype=float)
        if self.pi_table is not None:
            return np.array([self.pi_table.get(int(z), 0.0) for z in age])
        if self.alpha_schedule is not None:
            starts = np.array([s for s, _ in self.alpha_schedule])
            alphas = np.array([a for _, a in self.alpha_schedule], dtype=float)
            which = np.searchsorted(starts, np.asarray(when), side="right") - 1
            alpha = alphas[np.clip(which, 0, None)]
        else:
            alpha = np.full(age.shape, float(self.alpha))
        return _powerlaw_rate(age, alpha, self.horizon_steps)

    @classmethod
    def from_mapping(cls, obj: Mapping) -> "SynthConfig":
        kw = dict(obj)
        if "alpha" in kw and isinstance(kw["alpha"], str):
            kw["alpha"] = float(kw["alpha"])
        if "pi_table" in kw and kw["pi_table"] is not None:
            kw["pi_table"] = {int(k): float(v) for k, v in kw["pi_table"].items()}
        if "alpha_schedule" in kw and kw["alpha_schedule"] is not None:
            kw["alpha_schedule"] = [(int(s), float(a)) for s, a in kw["alpha_schedule"]]
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**kw)


def load_synth_config(path) -> SynthConfig:
    path = Path(path)
    if path.suffix.lower() == ".json":
        obj = json.loads(path.read_text())
    else:
        with open(path, "rb") as fh:
            obj = tomllib.load(fh)
    return SynthConfig.from_mapping(obj)


def _powerlaw_rate(age: np.ndarray, alpha: np.ndarray, horizon: int) -> np.ndarray:
    out = np.zeros(age.shape)
    for a in np.unique(alpha):
        sel = alpha == a
        if math.isinf(a):
            out[sel] = (age[sel] == 1).astype(float)
        else:
            norm = np.sum(np.arange(1, horizon + 1, dtype=float) ** -a)
            out[sel] = age[sel] ** -a / norm
    return np.clip(out, 0.0, 1.0)


def lifetime_probabilities(rates: np.ndarray) -> tuple[np.ndarray, float]:
    """Death probabilities per age from per-age death rates, plus survivor mass."""
    rates = np.clip(np.asarray(rates, dtype=float), 0.0, 1.0)
    survive = np.concatenate(([1.0], np.cumprod(1.0 - rates)))
    return rates * survive[:-1], float(survive[-1])


def hazard_from_lifetime(lifetime: Mapping[int, float]) -> dict[int, float]:
    """Convert probabilities of dying at each age into conditional death rates."""
    out = {}
    alive = 1.0
    for z in sorted(lifetime):
        p = lifetime[z]
        out[z] = min(1.0, p / alive) if alive > 0 else 0.0
        alive -= p
    return out


def powerlaw_lifetime(exponent: float, max_age: int, retained: float = 0.1) -> dict[int, float]:
    """Lifetime law ``f(z) ∝ z**-exponent`` on ``1..max_age`` keeping ``retained`` mass unspent."""
    z = np.arange(1, max_age + 1, dtype=float)
    f = z ** -exponent
    f *= (1.0 - retained) / f.sum()
    return {int(k): float(v) for k, v in zip(z, f)}


def stationary_issuance(births_per_step: int, lifetime: Mapping[int, float], horizon: int) -> list[int]:
    """Issuance that keeps expected births per step constant from step 0.

    With every cohort born at the same mass ``m`` and dying at age ``z`` with
    probability ``f(z)``, the expected trade volume at step ``t`` is
    ``m * F(t)``; minting ``m * (1 - F(t))`` keeps births at ``m``.
    """
    cdf = 0.0
    out = []
    for t in range(horizon):
        cdf += lifetime.get(t, 0.0) if t > 0 else 0.0
        out.append(max(0, int(round(births_per_step * (1.0 - cdf)))))
    return out


def _split(rng: np.random.Generator, units: int, probs: np.ndarray, residual: float) -> np.ndarray:
    """Multinomial split of ``units`` over death ages; last slot is 'never'."""
    p = np.concatenate((probs, [max(residual, 0.0)]))
    p = p / p.sum()
    return rng.multinomial(units, p)


def synthesize_ledger(config: SynthConfig) -> list[TxRecord]:
    """Generate a deterministic ledger following ``config``'s death-rate law."""
    rng = np.random.default_rng(config.seed)
    H = config.horizon_steps
    grid = config.grid
    first = config.first_index
    gran = config.granularity
    due: list[list[tuple[OutPoint, int]]] = [[] for _ in range(H)]
    records: list[TxRecord] = []

    def emit(txid: str, t: int, inputs, counts: np.ndarray, coinbase: bool, block_time: int):
        outputs = []
        nz = np.flatnonzero(counts)
        for slot in nz:
            vout = len(outputs)
            outputs.append(int(counts[slot]) * gran)
            if slot < counts.size - 1:
                due[t + 1 + slot].append((OutPoint(txid, vout), int(counts[slot])))
        records.append(TxRecord(txid, t, block_time, tuple(inputs), tuple(outputs), coinbase))

    for t in range(H):
        block_time = grid.time_of(first + t) - grid.step // 2
        ages = np.arange(1, H - t)
        probs, residual = lifetime_probabilities(config.hazard(t + ages, ages))
        s = config.issuance(t)
        if s > 0:
            emit(f"s{t:06d}c", t, (), _split(rng, s, probs, residual), True, block_time)
        spending = due[t]
        if not spending:
            continue
        k = min(config.txs_per_step, len(spending))
        for j in range(k):
            chunk = spending[j::k]
            units = sum(u for _, u in chunk)
            counts = _split(rng, units, probs, residual)
            emit(f"s{t:06d}x{j:03d}", t, [o for o, _ in chunk], counts, False, block_time)
    return records


# -- other fixtures ----------------------------------------------------------

def binomial_cascade(p: float, levels: int) -> np.ndarray:
    """Deterministic binomial multiplicative cascade on ``2**levels`` cells (sums to 1)."""
    w = np.array([1.0])
    for _ in range(levels):
        w = np.column_stack((w * p, w * (1.0 - p))).ravel()
    return w


def cascade_ledger(
    p: float = 0.7,
    levels: int = 10,
    mass: int = 10**13,
    start_date: str = "2012-01-01",
    step_days: int = 1,
) -> tuple[list[TxRecord], TimeGrid, int]:
    """Ledger whose cohort born at the first step trades like a binomial cascade.

    The cohort minted at step 0 is split into ``2**levels`` outputs with
    cascade weights; output ``j`` is spent at step ``j + 2``. A filler output,
    minted one step earlier, tops the volume of every step up to the same
    constant so that ``v_tau(t)`` is proportional to the cascade weight.

    Returns the records, the grid and the absolute index of the cohort.
    """
    weights = binomial_cascade(p, levels)
    amounts = np.rint(weights * mass).astype(np.int64)
    if amounts.min() <= 0:
        raise ValueError("mass too small for cascade resolution")
    target = 2 * int(amounts.max())
    grid = TimeGrid(0, step_days * DAY)
    first = grid.index_of_date(start_date)
    K = amounts.size

    def when(step: int) -> int:
        return grid.time_of(first + step) - grid.step // 2

    records = [TxRecord("cascade", 0, when(0), (), tuple(int(a) for a in amounts), True)]
    for step in range(1, K + 2):
        if step <= K:
            filler = target - int(amounts[step - 1])
            records.append(TxRecord(f"fill{step:05d}", step, when(step), (), (filler,), True))
        if step >= 2:
            j = step - 2
            inputs = (OutPoint("cascade", j), OutPoint(f"fill{step - 1:05d}", 0))
            records.append(TxRecord(f"spend{step:05d}", step, when(step), inputs, (target,), False))
    return records, grid, first


def random_ledger(
    n_tx: int,
    seed: int,
    grid: TimeGrid | None = None,
    start_date: str = "2011-06-01",
    reward: int = 50 * 100_000_000,
    blocks_per_step: float = 3.0,
) -> list[TxRecord]:
    """Irregular ledger for oracle tests.

    Features several blocks per grid step, fees claimed by the coinbase,
    spends of outputs created earlier in the same block (same-step churn),
    many-input and many-output transactions and slightly out-of-order
    block times.
    """
    rng = np.random.default_rng(seed)
    grid = grid or TimeGrid()
    t0 = grid.time_of(grid.index_of_date(start_date))
    pool: list[tuple[OutPoint, int]] = []
    records: list[TxRecord] = []
    height = 0
    clock = t0
    made = 0
    while made < n_tx:
        clock += int(rng.integers(0, int(2 * grid.step / blocks_per_step) + 1))
        block_time = clock - int(rng.integers(0, grid.step // 4)) if rng.random() < 0.1 else clock
        block_time = max(block_time, grid.epoch)
        body: list[TxRecord] = []
        fees = 0
        for k in range(int(rng.integers(0, 6))):
            if not pool:
                break
            n_in = int(min(len(pool), rng.integers(1, 4)))
            picks = sorted(rng.choice(len(pool), size=n_in, replace=False), reverse=True)
            spent = [pool.pop(i) for i in picks]
            total = sum(a for _, a in spent)
            fee = int(rng.integers(0, max(1, total // 200))) if rng.random() < 0.5 else 0
            fee = min(fee, total - 1)
            paid = total - fee
            cuts = sorted({int(c) for c in rng.integers(1, paid, size=int(rng.integers(0, 3)))}) if paid > 1 else []
            bounds = [0, *cuts, paid]
            outs = tuple(b - a for a, b in zip(bounds, bounds[1:]))
            txid = f"r{height:05d}t{k}"
            body.append(TxRecord(txid, height, block_time, tuple(o for o, _ in spent), outs, False))
            fees += fee
            pool.extend((OutPoint(txid, v), a) for v, a in enumerate(outs))
        claim = reward + fees - (int(rng.integers(0, 1000)) if rng.random() < 0.05 else 0)
        cb_outs = (claim,) if rng.random() < 0.7 else (claim // 2, claim - claim // 2)
        cb = TxRecord(f"r{height:05d}cb", height, block_time, (), cb_outs, True)
        records.append(cb)
        records.extend(body)
        made += 1 + len(body)
        pool.extend((OutPoint(cb.txid, v), a) for v, a in enumerate(cb_outs))
        height += 1
    return records


def synthetic_prices(
    grid: TimeGrid,
    start: int,
    length: int,
    seed: int = 0,
    initial: float = 100.0,
    drift: float = 0.001,
    volatility: float = 0.03,
) -> PriceSeries:
    """Seeded geometric random walk covering ``length`` grid steps."""
    rng = np.random.default_rng(seed)
    steps = rng.normal(drift, volatility, size=length - 1)
    path = initial * np.exp(np.concatenate(([0.0], np.cumsum(steps))))
    return PriceSeries(start, path)
