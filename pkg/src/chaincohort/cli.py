"""Command line entry point: ``chaincohort ingest | report | synth``.

Exit status: 0 success, 1 usage error, 2 data or invariant failure.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from pathlib import Path

from .cohort import CacheFormatError, HorizonError, build_flow_ledger, conservation_report, load_ledger, save_ledger
from .holders import HolderBands
from .ingest import DAY, SATOSHI_PER_BTC, LedgerError, PriceError, TimeGrid, dump_ledger, load_prices, parse_ledger
from .report import CACHE_NAME, PRICED, SUBREPORTS, ReportFailure, RunConfig, run_report
from .synth import load_synth_config, synthesize_ledger, synthetic_prices

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_step(text: str) -> int:
    """Grid step in seconds from ``7``, ``7d`` or ``1w``; at least one day."""
    m = re.fullmatch(r"\s*(\d+)\s*([dw]?)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad grid step {text!r}; use e.g. 1d or 1w")
    days = int(m.group(1)) * (7 if m.group(2) == "w" else 1)
    if days < 1:
        raise argparse.ArgumentTypeError("grid step must be at least 1 day")
    return days * DAY


def _int_range(text: str) -> list[int]:
    return [int(round(v)) for v in _num_range(text)]


def _num_range(text: str) -> list[float]:
    """``a:b`` (inclusive, unit step) or a comma list."""
    try:
        if ":" in text:
            a, b = (float(x) for x in text.split(":"))
            n = int(round(b - a))
            return [a + i for i in range(n + 1)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from None


def _bands(text: str) -> HolderBands:
    try:
        return HolderBands(tuple(float(x) for x in text.split(",")))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _window(text: str) -> tuple[str | None, str | None]:
    if ":" not in text:
        raise argparse.ArgumentTypeError("window must be FROM:TO (either side may be empty)")
    lo, hi = text.split(":", 1)
    return lo.strip() or None, hi.strip() or None


def _threads() -> int:
    raw = os.environ.get("CHAINCOHORT_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"CHAINCOHORT_THREADS must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chaincohort", description="Cohort ledger reconstruction and holding-time statistics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ing = sub.add_parser("ingest", help="parse a JSONL ledger and cache its flow ledger")
    ing.add_argument("--ledger", required=True, type=Path)
    ing.add_argument("--dt", type=parse_step, default=DAY, help="grid step, e.g. 1d or 1w (default 1d)")
    ing.add_argument("--out", required=True, type=Path, help="cache directory")

    rep = sub.add_parser("report", help="run a subreport on a cached ledger")
    rep.add_argument("subreport", choices=SUBREPORTS)
    rep.add_argument("--cache", required=True, type=Path)
    rep.add_argument("--prices", type=Path)
    rep.add_argument("--at", help="analysis dates, comma separated (default: the six reference dates)")
    rep.add_argument("--format", default="csv", help="csv or csv,svg")
    rep.add_argument("--out", type=Path, help="output directory (default: the cache directory)")
    rep.add_argument("--bands", type=_bands, default=HolderBands(), help="band boundaries in days (default 30,365)")
    rep.add_argument("--window", type=_window, default=(None, None), help="sampling window FROM:TO dates")
    rep.add_argument("--every", type=int, default=1, help="sample every N grid steps")
    rep.add_argument("--tau", help="cohort date for the multifractal measure")
    rep.add_argument("--q", type=_num_range, default=None, help="moment orders, a:b or list (default -5:10)")
    rep.add_argument("--dts", type=_int_range, default=None, help="box sizes in steps (default 1:50)")
    rep.add_argument("--arma-max", type=int, default=5)
    rep.add_argument("--split", help="split date for the exponent/return regression")

    syn = sub.add_parser("synth", help="generate a synthetic ledger")
    syn.add_argument("--config", required=True, type=Path)
    syn.add_argument("--out", required=True, type=Path)
    syn.add_argument("--prices-out", type=Path, help="also write a synthetic price file")
    syn.add_argument("--price-seed", type=int, default=0)
    return p


def cmd_ingest(args) -> int:
    grid = TimeGrid(0, args.dt)
    with open(args.ledger, "rb") as fh:
        records = parse_ledger(fh, grid)
    ledger = build_flow_ledger(records, grid)
    rep = conservation_report(ledger)
    if not rep.ok:
        print(str(rep), file=sys.stderr)
        return EXIT_DATA
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / CACHE_NAME
    tmp = path.with_suffix(".tmp")
    save_ledger(ledger, tmp)
    os.replace(tmp, path)
    n = int(ledger.supply[-1]) if ledger.length else 0
    print(f"transactions: {len(records)}")
    print(f"steps: {ledger.length} ({grid.label(ledger.start)} .. {grid.label(ledger.horizon)})" if ledger.length else "steps: 0")
    print(f"N = {n / SATOSHI_PER_BTC:.8g} BTC, total volume = {int(ledger.volumes.sum()) / SATOSHI_PER_BTC:.8g} BTC")
    print(str(rep))
    return 0


def cmd_report(args) -> int:
    formats = {f.strip() for f in args.format.split(",") if f.strip()}
    if not formats or not formats <= {"csv", "svg"}:
        raise UsageError(f"--format must be csv or csv,svg, got {args.format!r}")
    cache = args.cache / CACHE_NAME if args.cache.is_dir() else args.cache
    if not cache.exists():
        raise UsageError(f"no ledger cache at {cache}")
    if args.subreport in PRICED and args.prices is None:
        raise UsageError(f"report {args.subreport} needs --prices")
    if args.prices is not None and not args.prices.exists():
        raise UsageError(f"price file {args.prices} not found")
    if args.every < 1:
        raise UsageError("--every must be >= 1")
    ledger = load_ledger(cache)
    prices = None
    if args.prices is not None:
        with open(args.prices, "rb") as fh:
            prices = load_prices(fh, ledger.grid)
    cfg = RunConfig(
        out_dir=args.out or (args.cache if args.cache.is_dir() else args.cache.parent),
        prices=prices,
        dates=[d.strip() for d in args.at.split(",") if d.strip()] if args.at else None,
        svg="svg" in formats,
        bands=args.bands,
        window=args.window,
        every=args.every,
        tau=args.tau,
        arma_max=args.arma_max,
        split=args.split,
        threads=_threads(),
    )
    if args.q is not None:
        cfg.qs = args.q
    if args.dts is not None:
        cfg.dts = args.dts
    for path in run_report(args.subreport, ledger, cfg):
        print(path)
    return 0


def cmd_synth(args) -> int:
    if not args.config.exists():
        raise UsageError(f"config file {args.config} not found")
    try:
        config = load_synth_config(args.config)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad synth config: {exc}") from None
    records = synthesize_ledger(config)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    tmp = args.out.with_name(args.out.name + ".tmp")
    with open(tmp, "w") as fh:
        dump_ledger(records, fh)
    os.replace(tmp, args.out)
    print(f"wrote {len(records)} transactions to {args.out}")
    if args.prices_out:
        grid = config.grid
        prices = synthetic_prices(grid, config.first_index, config.horizon_steps, seed=args.price_seed)
        day_grid = TimeGrid()
        # the price file is daily; hold each step's price over its days
        with open(args.prices_out, "w") as fh:
            fh.write("date,close_usd\n")
            for i, p in enumerate(prices.values):
                idx = prices.start + i
                last_day = grid.time_of(idx) // DAY
                for day in range(last_day - int(grid.step_days) + 1, last_day + 1):
                    fh.write(f"{day_grid.label(day)},{p:.12g}\n")
        print(f"wrote prices to {args.prices_out}")
    return 0


COMMANDS = {"ingest": cmd_ingest, "report": cmd_report, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"chaincohort: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LedgerError, PriceError, CacheFormatError, HorizonError, ReportFailure) as exc:
        print(f"chaincohort: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"chaincohort: error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc, ValueError) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
