"""Report subcommands: run an analysis on a cached ledger and write CSV/JSON/SVG files."""

from __future__ import annotations

import json
import math
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import plotting
from .cohort import FlowLedger, conservation_report, snapshot_vector
from .flows import averaged_flow, flow_profile, identity_check, jump_report
from .holders import HolderBands, corr_matrix, diff_series, holder_fractions, volume_fractions
from .ingest import SATOSHI_PER_BTC, PriceSeries
from .multifractal import DEFAULT_DT, DEFAULT_Q, MultifractalError, mf_spectrum
from .returns import (
    AGG_FIELDS,
    b2m_density,
    b2m_distribution,
    pl_aggregates,
    pnl_distribution,
    realized_aggregates_series,
)
from .scaling import PowerLawError, Sampling, alpha_return_regression, alpha_series, avg_transition
from .tsa import adf_test, arma_select, ljung_box, var_fit

SUBREPORTS = ("holders", "b2m", "pnl", "flows", "scaling", "multifractal", "sanity")
PRICED = ("b2m", "pnl")
# analysis dates used when none are given
DEFAULT_DATES = ("2013-04-04", "2013-07-04", "2013-11-28", "2015-01-15", "2017-12-21", "2019-01-31")
CACHE_NAME = "ledger.ccfl"
BLOCKS_PER_DAY = 144
HALVING_INTERVAL = 210_000


class ReportFailure(Exception):
    """A data or invariant failure; the CLI maps it to exit status 2."""


@dataclass
class RunConfig:
    out_dir: Path
    prices: PriceSeries | None = None
    dates: Sequence[str] | None = None
    svg: bool = False
    bands: HolderBands = field(default_factory=HolderBands)
    window: tuple[str | None, str | None] = (None, None)
    every: int = 1
    tau: str | None = None
    qs: Sequence[float] = DEFAULT_Q
    dts: Sequence[int] = DEFAULT_DT
    arma_max: int = 5
    ljung_box_lags: int = 10
    split: str | None = None
    threads: int = 1


# -- output helpers -----------------------------------------------------------

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return "" if math.isnan(v) else f"{v:.12g}"


def _atomic(path: Path, write: Callable[[str], None]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]

    def write(tmp):
        with open(tmp, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")

    _atomic(path, write)
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else float(f"{v:.12g}")
    return obj


def write_json(path: Path, obj) -> Path:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"

    def write(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)

    _atomic(path, write)
    return path


# matplotlib's text layout is not thread-safe; plots are rendered one at a time
_SVG_LOCK = threading.Lock()


def write_svg(path: Path, draw: Callable, *args, **kwargs) -> Path:
    with _SVG_LOCK:
        _atomic(path, lambda tmp: draw(tmp, *args, **kwargs))
    return path


def _years(ledger: FlowLedger, t) -> np.ndarray:
    ts = ledger.grid.epoch + np.asarray(t, dtype=float) * ledger.grid.step
    return 1970.0 + ts / (365.2425 * 86400.0)


# -- shared resolution of run options -------------------------------------------

def resolve_dates(ledger: FlowLedger, dates: Sequence[str] | None, earliest: int | None = None) -> list[tuple[str, int]]:
    """Map analysis dates to grid indices inside the ledger.

    Explicit dates outside the ledger are an error; default dates outside it
    are dropped.
    """
    lo = ledger.start + 1 if earliest is None else earliest
    explicit = dates is not None
    out = []
    for d in dates if explicit else DEFAULT_DATES:
        try:
            t = ledger.grid.index_of_date(d)
        except ValueError as exc:
            raise ReportFailure(f"bad analysis date {d!r}: {exc}") from None
        if lo <= t <= ledger.horizon:
            out.append((d, t))
        elif explicit:
            raise ReportFailure(
                f"analysis date {d} outside ledger range {ledger.grid.label(lo)}..{ledger.grid.label(ledger.horizon)}")
    if not out:
        raise ReportFailure("none of the default analysis dates falls inside the ledger; pass --at")
    return out


def resolve_sampling(ledger: FlowLedger, cfg: RunConfig) -> Sampling:
    lo, hi = cfg.window
    return Sampling(
        None if lo is None else ledger.grid.index_of_date(lo),
        None if hi is None else ledger.grid.index_of_date(hi),
        cfg.every,
    )


def _map(cfg: RunConfig, fn, items):
    items = list(items)
    if cfg.threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(min(cfg.threads, len(items))) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _guard(fn, *args, **kwargs) -> dict:
    """Run a statistic, turning precondition failures into a recorded skip."""
    try:
        return fn(*args, **kwargs)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return {"skipped": str(exc)}


# -- subreports ---------------------------------------------------------------------

def report_holders(ledger: FlowLedger, cfg: RunConfig) -> list[Path]:
    bands = cfg.bands
    suffix = ["s", "m", "l"] if len(bands.names) == 3 else [str(i) for i in range(len(bands.names))]
    fh = holder_fractions(ledger, bands)
    vf = volume_fractions(ledger, bands)
    label = ledger.grid.label
    out = cfg.out_dir
    files = [
        write_csv(out / "holder_fractions.csv", ["t"] + [f"fh_{s}" for s in suffix],
                  ([label(t), *row] for t, row in zip(fh.t, fh.values))),
        write_csv(out / "volume_fractions.csv", ["t"] + [f"vf_{s}" for s in suffix],
                  ([label(t), *row] for t, row in zip(vf.t, vf.values))),
    ]
    for name, series in (("holder", fh), ("volume", vf)):
        if series.values.size and np.max(np.abs(series.values.sum(axis=1) - 1.0)) > 1e-12:
            raise ReportFailure(f"{name} fractions do not sum to one")

    names = [f"fh_{s}" for s in suffix]
    dnames = [f"dfh_{s}" for s in suffix]
    report: dict = {
        "steps": int(fh.t.size),
        "skipped_steps": {"holder": len(fh.skipped), "volume": len(vf.skipped)},
        "bands_days": list(bands.boundaries),
    }

    def corr(values, labels):
        if values.shape[0] < 3:
            return {"skipped": "fewer than 3 points"}
        cm = corr_matrix(values.T)
        return {"labels": labels, "matrix": cm.matrix.tolist(), "undefined": [list(p) for p in cm.undefined]}

    diffs = diff_series(fh).values if fh.t.size >= 2 else np.zeros((0, len(names)))
    report["correlation"] = {"levels": corr(fh.values, names), "differences": corr(diffs, dnames)}

    def adf(y):
        r = adf_test(y, "drift")
        return {"t_stat": r.t_stat, "critical_5": r.critical_5, "lags": r.lags, "nobs": r.nobs,
                "regression": "drift", "reject_at_95": r.reject_at_95}

    def lb(y):
        r = ljung_box(y, cfg.ljung_box_lags)
        return {"q": r.q, "p_value": r.p_value, "lags": r.lags}

    def arma(y):
        sel = arma_select(y, cfg.arma_max, cfg.arma_max)

        def cell(f):
            return {"p": f.p, "q": f.q, "ar": f.ar.tolist(), "ma": f.ma.tolist(), "mean": f.mean,
                    "sigma2": f.sigma2, "aic": f.aic, "bic": f.bic}

        return {"aic": cell(sel.by_aic), "bic": cell(sel.by_bic), "skipped_cells": [list(c) for c in sel.skipped]}

    def var(a, b):
        r = var_fit(a, b)
        return {"coef": r.coef.tolist(), "se": r.se.tolist(), "t_stat": r.tstat.tolist(),
                "intercept": r.intercept.tolist(), "nobs": r.nobs}

    report["adf"] = {n: {"levels": _guard(adf, fh.values[:, i]), "differences": _guard(adf, diffs[:, i])}
                     for i, n in enumerate(names)}
    report["ljung_box"] = {n: _guard(lb, diffs[:, i]) for i, n in enumerate(dnames)}
    arma_results = _map(cfg, lambda i: _guard(arma, diffs[:, i]), range(len(dnames)))
    report["arma"] = dict(zip(dnames, arma_results))
    report["var"] = {f"{dnames[i]}~{dnames[j]}": _guard(var, diffs[:, i], diffs[:, j])
                     for i in range(len(dnames)) for j in range(i + 1, len(dnames))}
    files.append(write_json(out / "stats_report.json", report))

    if cfg.svg:
        x = _years(ledger, fh.t)
        files.append(write_svg(out / "holder_fractions.svg", plotting.line_chart, x,
                               list(zip(names, fh.values.T)), "Holder fractions", "year", "fraction"))
        files.append(write_svg(out / "volume_fractions.svg", plotting.line_chart, _years(ledger, vf.t),
                               list(zip([f"vf_{s}" for s in suffix], vf.values.T)),
                               "Volume fractions", "year", "fraction"))
    return files


def _agg_row(label: str, agg) -> list:
    return [label] + [getattr(agg, k) for k in AGG_FIELDS]


def report_b2m(ledger: FlowLedger, cfg: RunConfig) -> list[Path]:
    dates = resolve_dates(ledger, cfg.dates)

    def one(item):
        d, t = item
        dist = b2m_distribution(ledger, cfg.prices, t)
        if dist.total != int(snapshot_vector(ledger, t)[:-1].sum()):
            raise ReportFailure(f"b2m weights at {d} do not match the held supply")
        r, c = dist.cdf_table()
        if c.size and (np.any(np.diff(c) < 0) or c[-1] != 1.0):
            raise ReportFailure(f"b2m cdf at {d} is not a distribution function")
        files = [write_csv(cfg.out_dir / f"b2m_cdf_{d}.csv", ["r", "cdf"], zip(r, c))]
        agg = pl_aggregates(dist) if not dist.empty else None
        if dist.empty:
            return files, None
        try:
            dens = b2m_density(dist)
        except ValueError:
            dens = None
        if dens is not None:
            if abs(dens.integral() - 1.0) > 1e-6:
                raise ReportFailure(f"b2m density at {d} does not integrate to one")
            files.append(write_csv(cfg.out_dir / f"b2m_density_{d}.csv", ["r", "density"], zip(dens.x, dens.f)))
        if cfg.svg:
            files.append(write_svg(cfg.out_dir / f"b2m_cdf_{d}.svg", plotting.step_chart, r, c,
                                   f"Book-to-market cdf {d}", "daily log return", "cdf"))
            if dens is not None:
                files.append(write_svg(cfg.out_dir / f"b2m_density_{d}.svg", plotting.line_chart, dens.x,
                                       [("density", dens.f)], f"Book-to-market density {d}",
                                       "daily log return", "density"))
        return files, _agg_row(d, agg)

    results = _map(cfg, one, dates)
    files = [f for fs, _ in results for f in fs]
    rows = [row for _, row in results if row is not None]
    files.append(write_csv(cfg.out_dir / "pl_aggregates.csv", ["t", *AGG_FIELDS], rows))
    return files


def report_pnl(ledger: FlowLedger, cfg: RunConfig) -> list[Path]:
    dates = resolve_dates(ledger, cfg.dates)

    def one(item):
        d, t = item
        dist = pnl_distribution(ledger, cfg.prices, t)
        if dist.total != ledger.volume(t):
            raise ReportFailure(f"pnl weights at {d} do not match the traded volume")
        r, c = dist.cdf_table()
        files = [write_csv(cfg.out_dir / f"pnl_cdf_{d}.csv", ["r", "cdf"], zip(r, c))]
        if cfg.svg and r.size:
            files.append(write_svg(cfg.out_dir / f"pnl_cdf_{d}.svg", plotting.step_chart, r, c,
                                   f"Realized return cdf {d}", "daily log return", "cdf"))
        return files, [d, dist.total, dist.churn]

    results = _map(cfg, one, dates)
    files = [f for fs, _ in results for f in fs]
    files.append(write_csv(cfg.out_dir / "pnl_volume.csv", ["t", "volume", "churn"], [row for _, row in results]))

    series = realized_aggregates_series(ledger, cfg.prices)
    fp, P, L, Pb, Lb = (series.column(k) for k in AGG_FIELDS)
    defined = ~np.isnan(Pb)
    if np.any(np.abs(P[defined] - fp[defined] * Pb[defined]) > 1e-12):
        raise ReportFailure("realized profit identity violated")
    defined = ~np.isnan(Lb)
    if np.any(np.abs(L[defined] - (1 - fp[defined]) * Lb[defined]) > 1e-12):
        raise ReportFailure("realized loss identity violated")
    w = series.window_steps
    header = ["t", *AGG_FIELDS] + [f"{k}_mean{w}" for k in AGG_FIELDS] + [f"{k}_median{w}" for k in AGG_FIELDS]
    label = ledger.grid.label
    files.append(write_csv(cfg.out_dir / "realized_aggregates.csv", header,
                           ([label(t), *v, *m, *md] for t, v, m, md in
                            zip(series.t, series.values, series.moving_mean, series.moving_median))))
    if cfg.svg:
        files.append(write_svg(cfg.out_dir / "realized_aggregates.svg", plotting.line_chart,
                               _years(ledger, series.t),
                               [("Pbar", Pb), ("Lbar", Lb), (f"Pbar mean{w}", series.moving_mean[:, 3])],
                               "Average realized gain and loss", "year", "daily log return"))
    return files


def report_flows(ledger: FlowLedger, cfg: RunConfig) -> list[Path]:
    dates = resolve_dates(ledger, cfg.dates)
    step_days = ledger.grid.step_days

    def one(item):
        d, t = item
        prof = flow_profile(ledger, t)
        check = identity_check(prof)
        if not check:
            raise ReportFailure(f"flow identity failed at {d}: {check.detail}")
        width = max(prof.d_plus.size, prof.d_minus.size)
        cp, cm = prof.c_plus, prof.c_minus
        rows = []
        for i in range(width):
            plus = (prof.d_plus[i], cp[i]) if i < prof.d_plus.size else (None, None)
            minus = (prof.d_minus[i], cm[i]) if i < prof.d_minus.size else (None, None)
            rows.append([(i + 1) * step_days, *plus, *minus])
        files = [write_csv(cfg.out_dir / f"flow_profile_{d}.csv",
                           ["age_days", "d_plus", "c_plus", "d_minus", "c_minus"], rows)]
        if cfg.svg and width:
            ages = np.arange(1, width + 1) * step_days
            pad = lambda a: np.concatenate((a, np.full(width - a.size, np.nan)))  # noqa: E731
            files.append(write_svg(cfg.out_dir / f"flow_profile_{d}.svg", plotting.line_chart, ages,
                                   [("D+", pad(prof.d_plus)), ("D-", pad(prof.d_minus))],
                                   f"Flow fractions {d}", "age (days)", "fraction", logx=True, logy=True))
        summary = {
            "t": d, "issuance_share": prof.issuance_share, "residual_share": prof.residual_share,
            "inflow_defect": check.inflow_defect, "outflow_defect": check.outflow_defect,
            "jumps": [{"side": j.side, "age_days": j.age * step_days, "share": j.share} for j in jump_report(prof)],
        }
        return files, summary

    results = _map(cfg, one, dates)
    files = [f for fs, _ in results for f in fs]
    summary: dict = {"profiles": [s for _, s in results]}
    try:
        avg = averaged_flow(ledger, resolve_sampling(ledger, cfg), threads=cfg.threads)
    except (ValueError, PowerLawError) as exc:
        summary["averaged"] = {"skipped": str(exc)}
    else:
        files.append(write_csv(cfg.out_dir / "avg_flows.csv",
                               ["age", "mean_d_plus", "mean_d_minus", "n_samples_plus", "n_samples_minus"],
                               zip(avg.ages, avg.mean_plus, avg.mean_minus, avg.n_plus, avg.n_minus)))
        summary["averaged"] = {
            "n_times": avg.n_times,
            "alpha_plus": avg.fit_plus.alpha, "alpha_plus_std": avg.fit_plus.alpha_std,
            "alpha_minus": avg.fit_minus.alpha, "alpha_minus_std": avg.fit_minus.alpha_std,
            "mean_finite_plus": avg.fit_plus.mean_finite, "mean_finite_minus": avg.fit_minus.mean_finite,
            "fits": avg.fit_plus.n_fits,
        }
        if cfg.svg:
            files.append(write_svg(cfg.out_dir / "avg_flows.svg", plotting.line_chart, avg.ages,
                                   [("mean D+", avg.mean_plus), ("mean D-", avg.mean_minus)],
                                   "Time-averaged flow fractions", "age (steps)", "fraction",
                                   logx=True, logy=True))
    files.append(write_json(cfg.out_dir / "flow_summary.json", summary))
    return files


def _fit_dict(fit) -> dict:
    return {"alpha": fit.alpha, "alpha_std": fit.alpha_std, "beta": fit.beta, "fits": fit.n_fits,
            "refused_windows": fit.refused, "dropped_points": fit.dropped, "mean_finite": fit.mean_finite,
            "r2_mean": float(np.mean(fit.r2))}


def report_scaling(ledger: FlowLedger, cfg: RunConfig) -> list[Path]:
    sampling = resolve_sampling(ledger, cfg)
    files = []
    summary: dict = {}
    try:
        avg = avg_transition(ledger, sampling)
    except ValueError as exc:
        summary["avg_transition"] = {"skipped": str(exc)}
    else:
        files.append(write_csv(cfg.out_dir / "pi_z.csv", ["z", "pi_mean", "n_samples"],
                               zip(avg.ages, avg.pi_mean, avg.n_samples)))
        summary["avg_transition"] = {"n_times": avg.n_times, "gaps": len(avg.gaps),
                                     "fit": _fit_dict(avg.fit) if avg.fit else {"skipped": "no usable fit window"}}
        if cfg.svg:
            files.append(write_svg(cfg.out_dir / "pi_z.svg", plotting.line_chart, avg.ages,
                                   [("pi(z)", avg.pi_mean)], "Average death rate by age", "age z (steps)",
                                   "pi(z)", logx=True, logy=True))
    series = alpha_series(ledger, sampling)
    label = ledger.grid.label
    files.append(write_csv(cfg.out_dir / "alpha_t.csv", ["t", "alpha_mean", "alpha_std"],
                           ([label(t), a, s] for t, a, s in zip(series.t, series.alpha_mean, series.alpha_std))))
    summary["alpha_t"] = {"n_times": int(series.t.size), "flagged": len(series.flagged)}
    if cfg.svg and series.t.size:
        files.append(write_svg(cfg.out_dir / "alpha_t.svg", plotting.line_chart, _years(ledger, series.t),
                               [("alpha_t", series.alpha_mean)], "Death-rate exponent over time", "year", "alpha"))
    if cfg.split and cfg.prices is not None:
        realized = realized_aggregates_series(ledger, cfg.prices)

        def regress():
            before, after = alpha_return_regression(series.t, series.alpha_mean, realized.t,
                                                    realized.column("Pbar"), ledger.grid.index_of_date(cfg.split))
            return {k: {"n": c.n, "slope": c.slope, "intercept": c.intercept, "correlation": c.correlation}
                    for k, c in (("before", before), ("after", after))}

        summary["alpha_return"] = _guard(regress)
        summary["alpha_return"]["split"] = cfg.split
    files.append(write_json(cfg.out_dir / "scaling_summary.json", summary))
    return files


def report_multifractal(ledger: FlowLedger, cfg: RunConfig) -> list[Path]:
    tau = ledger.start if cfg.tau is None else ledger.grid.index_of_date(cfg.tau)
    lo, hi = resolve_sampling(ledger, cfg).t_from, resolve_sampling(ledger, cfg).t_to
    try:
        spec = mf_spectrum(ledger, tau, cfg.qs, cfg.dts, lo, hi)
    except MultifractalError as exc:
        raise ReportFailure(f"multifractal spectrum: {exc}") from None
    rows = [(q, int(dt), spec.moments[i, j], spec.excluded[i, j])
            for i, q in enumerate(spec.qs) for j, dt in enumerate(spec.dts)]
    files = [
        write_csv(cfg.out_dir / "mf_moments.csv", ["q", "dt", "M", "excluded"], rows),
        write_csv(cfg.out_dir / "eta_q.csv", ["q", "eta", "r2"], zip(spec.qs, spec.eta, spec.r2)),
        write_json(cfg.out_dir / "mf_summary.json", {
            "tau": ledger.grid.label(tau), "concavity": spec.concavity,
            "second_differences": spec.second_diff.tolist(), "skipped_steps": len(spec.skipped),
            "excluded_zero_boxes": int(spec.excluded.sum()),
        }),
    ]
    if cfg.svg:
        files.append(write_svg(cfg.out_dir / "eta_q.svg", plotting.line_chart, spec.qs, [("eta(q)", spec.eta)],
                               "Moment scaling exponents", "q", "eta(q)", markers=True))
        sel = [i for i, q in enumerate(spec.qs) if q in (-2.0, 1.0, 2.0, 5.0)] or [0]
        files.append(write_svg(cfg.out_dir / "mf_moments.svg", plotting.line_chart, spec.dts,
                               [(f"q={spec.qs[i]:g}", spec.moments[i]) for i in sel],
                               "Box-measure moments", "dt (steps)", "M", logx=True, logy=True, markers=True))
    return files


def block_reward(height: int) -> int:
    """Scheduled block subsidy in satoshi at ``height``."""
    halvings = height // HALVING_INTERVAL
    return 0 if halvings >= 64 else (50 * SATOSHI_PER_BTC) >> halvings


def report_sanity(ledger: FlowLedger, cfg: RunConfig) -> list[Path]:
    rep = conservation_report(ledger)
    if not rep.ok:
        raise ReportFailure(str(rep))
    blocks = BLOCKS_PER_DAY * ledger.grid.step_days
    label = ledger.grid.label
    rows = []
    for r in range(ledger.length):
        h = int(ledger.heights[r])
        expected = blocks * block_reward(h) if h >= 0 else None
        rows.append([label(ledger.start + r), int(ledger.supply[r]), int(ledger.issuance[r]),
                     int(ledger.coinbase[r]), int(ledger.volumes[r]), int(ledger.churn[r]), expected])
    files = [write_csv(cfg.out_dir / "supply.csv",
                       ["t", "N", "S", "coinbase", "V", "churn", "expected_coinbase"], rows)]
    files.append(write_json(cfg.out_dir / "sanity.json", {
        "conservation": str(rep), "ok": rep.ok, "steps": ledger.length,
        "N_horizon": int(ledger.supply[-1]) if ledger.length else 0,
        "sum_issuance": int(ledger.issuance.sum()),
    }))
    if cfg.svg and ledger.length:
        x = _years(ledger, np.arange(ledger.start, ledger.horizon + 1))
        files.append(write_svg(cfg.out_dir / "supply.svg", plotting.line_chart, x,
                               [("N(t) BTC", ledger.supply / SATOSHI_PER_BTC)], "Outstanding supply", "year", "BTC"))
        exp = np.array([np.nan if row[-1] is None else row[-1] for row in rows], dtype=float)
        files.append(write_svg(cfg.out_dir / "coinbase.svg", plotting.line_chart, x,
                               [("coinbase", ledger.coinbase / SATOSHI_PER_BTC),
                                ("expected", exp / SATOSHI_PER_BTC)],
                               "Coinbase volume per step", "year", "BTC"))
    return files


RUNNERS = {
    "holders": report_holders,
    "b2m": report_b2m,
    "pnl": report_pnl,
    "flows": report_flows,
    "scaling": report_scaling,
    "multifractal": report_multifractal,
    "sanity": report_sanity,
}


def run_report(sub: str, ledger: FlowLedger, cfg: RunConfig) -> list[Path]:
    if sub not in RUNNERS:
        raise ValueError(f"unknown subreport {sub!r}")
    if sub in PRICED and cfg.prices is None:
        raise ValueError(f"subreport {sub} needs --prices")
    if ledger.empty:
        raise ReportFailure("ledger is empty")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return RUNNERS[sub](ledger, cfg)
