import csv
import json
import math

import pytest

from chaincohort.cli import main, parse_step
from chaincohort.cohort import build_flow_ledger, cache_bytes, load_ledger
from chaincohort.ingest import DAY, TimeGrid, dump_ledger
from chaincohort.synth import SynthConfig, cascade_ledger, synthesize_ledger, synthetic_prices

GENESIS = '{"txid":"a","height":0,"time":1231006505,"inputs":[],"outputs":[5000000000],"coinbase":true}\n'


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_ledger(path, records):
    with open(path, "w") as fh:
        dump_ledger(records, fh)
    return path


@pytest.fixture(scope="module")
def synth_cache(tmp_path_factory):
    """Ingested synthetic ledger with 50 BTC issued per daily step and a price file."""
    d = tmp_path_factory.mktemp("synth")
    cfg = SynthConfig(horizon_steps=300, alpha=0.9, issuance_per_step=50_000,
                      granularity=10**5, seed=7, start_date="2013-01-01", txs_per_step=2)
    write_ledger(d / "L.jsonl", synthesize_ledger(cfg))
    assert main(["ingest", "--ledger", str(d / "L.jsonl"), "--out", str(d / "cache")]) == 0
    prices = synthetic_prices(cfg.grid, cfg.first_index, cfg.horizon_steps, seed=1)
    with open(d / "P.csv", "w") as fh:
        fh.write("date,close_usd\n")
        for i, p in enumerate(prices.values):
            fh.write(f"{TimeGrid().label(prices.start + i)},{float(p)!r}\n")
    return d, cfg


# -- ingest ------------------------------------------------------------------------------

def test_ingest_single_mint(tmp_path, capsys):
    (tmp_path / "L.jsonl").write_text(GENESIS)
    assert main(["ingest", "--ledger", str(tmp_path / "L.jsonl"), "--out", str(tmp_path / "c")]) == 0
    out = capsys.readouterr().out
    assert "N = 50 BTC" in out and "conservation OK" in out
    assert (tmp_path / "c" / "ledger.ccfl").exists()


def test_ingest_double_spend_exits_2(tmp_path, capsys):
    spend = '{"txid":"b","height":1,"time":1231006600,"inputs":[["a",0],["a",0]],"outputs":[100],"coinbase":false}\n'
    (tmp_path / "L.jsonl").write_text(GENESIS + spend)
    assert main(["ingest", "--ledger", str(tmp_path / "L.jsonl"), "--out", str(tmp_path / "c")]) == 2
    err = capsys.readouterr().err
    assert "a" in err and "line 2" in err
    assert not (tmp_path / "c" / "ledger.ccfl").exists()


def test_ingest_malformed_exits_2(tmp_path):
    (tmp_path / "L.jsonl").write_text(GENESIS + "{not json\n")
    assert main(["ingest", "--ledger", str(tmp_path / "L.jsonl"), "--out", str(tmp_path / "c")]) == 2


def test_cache_reload_matches_rebuild(tmp_path):
    cfg = SynthConfig(horizon_steps=200, alpha=0.87, issuance_per_step=10**6, seed=5, step_days=7,
                      txs_per_step=30)
    recs = synthesize_ledger(cfg)
    assert len(recs) > 5000
    write_ledger(tmp_path / "L.jsonl", recs)
    assert main(["ingest", "--ledger", str(tmp_path / "L.jsonl"), "--dt", "1w", "--out", str(tmp_path)]) == 0
    rebuilt = build_flow_ledger(recs, TimeGrid(0, 7 * DAY))
    assert cache_bytes(load_ledger(tmp_path / "ledger.ccfl")) == cache_bytes(rebuilt)


# -- usage errors ----------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    [],
    ["report", "nonsense", "--cache", "x"],
    ["ingest", "--ledger", "x"],
    ["ingest", "--ledger", "x", "--out", "y", "--dt", "12h"],
])
def test_usage_errors_exit_1(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_missing_inputs_exit_1(tmp_path, synth_cache):
    d, _ = synth_cache
    assert main(["report", "sanity", "--cache", str(tmp_path)]) == 1
    assert main(["report", "b2m", "--cache", str(d / "cache")]) == 1
    assert main(["report", "sanity", "--cache", str(d / "cache"), "--format", "png"]) == 1
    assert main(["ingest", "--ledger", str(tmp_path / "none.jsonl"), "--out", str(tmp_path)]) == 1


def test_step_parsing():
    assert parse_step("7") == parse_step("7d") == parse_step("1w") == 7 * DAY


# -- reports --------------------------------------------------------------------------------

def test_sanity_linear_supply(synth_cache, tmp_path):
    d, cfg = synth_cache
    assert main(["report", "sanity", "--cache", str(d / "cache"), "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "supply.csv")
    assert len(table) == cfg.horizon_steps
    s = 0
    for i, row in enumerate(table):
        s += int(row["S"])
        assert int(row["N"]) == (i + 1) * 50 * 10**8 == s
    assert json.loads((tmp_path / "sanity.json").read_text())["ok"] is True


def test_flows_report_at_date(synth_cache, tmp_path):
    d, _ = synth_cache
    assert main(["report", "flows", "--cache", str(d / "cache"), "--at", "2013-06-01", "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "flow_profile_2013-06-01.csv")
    assert list(table[0]) == ["age_days", "d_plus", "c_plus", "d_minus", "c_minus"]
    summary = json.loads((tmp_path / "flow_summary.json").read_text())
    # a failed identity aborts the run with exit 2; the summary records the defects
    for p in summary["profiles"]:
        assert abs(p["inflow_defect"]) <= 1e-12 and abs(p["outflow_defect"]) <= 1e-12


def test_date_outside_ledger_exits_2(synth_cache, tmp_path):
    d, _ = synth_cache
    assert main(["report", "flows", "--cache", str(d / "cache"), "--at", "2020-01-01", "--out", str(tmp_path)]) == 2


def test_svg_never_changes_csv(synth_cache, tmp_path):
    d, _ = synth_cache
    base = ["--cache", str(d / "cache"), "--prices", str(d / "P.csv"), "--at", "2013-06-01,2013-09-01"]
    for sub in ("holders", "pnl", "flows"):
        a, b = tmp_path / sub / "csv", tmp_path / sub / "svg"
        assert main(["report", sub, *base, "--out", str(a)]) == 0
        assert main(["report", sub, *base, "--out", str(b), "--format", "csv,svg"]) == 0
        csvs = sorted(p.name for p in a.iterdir())
        assert csvs == sorted(p.name for p in b.iterdir() if p.suffix != ".svg")
        assert any(p.suffix == ".svg" for p in b.iterdir())
        for name in csvs:
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_multifractal_report_on_cascade(tmp_path):
    recs, grid, tau = cascade_ledger()
    write_ledger(tmp_path / "L.jsonl", recs)
    assert main(["ingest", "--ledger", str(tmp_path / "L.jsonl"), "--out", str(tmp_path)]) == 0
    argv = ["report", "multifractal", "--cache", str(tmp_path), "--tau", grid.label(tau),
            "--dts", "1,2,4,8,16,32"]
    assert main(argv) == 0
    for row in rows(tmp_path / "eta_q.csv"):
        q = float(row["q"])
        assert float(row["eta"]) == pytest.approx(1 - math.log2(0.7 ** q + 0.3 ** q), abs=0.05)


def test_synth_command(tmp_path, capsys):
    (tmp_path / "s.toml").write_text('horizon_steps = 30\nalpha = 1.2\nissuance_per_step = 1000\nseed = 4\n')
    argv = ["synth", "--config", str(tmp_path / "s.toml"), "--out", str(tmp_path / "L.jsonl"),
            "--prices-out", str(tmp_path / "P.csv")]
    assert main(argv) == 0
    first = (tmp_path / "L.jsonl").read_bytes()
    assert main(argv) == 0
    assert (tmp_path / "L.jsonl").read_bytes() == first
    assert (tmp_path / "P.csv").read_text().startswith("date,close_usd\n")
    (tmp_path / "bad.toml").write_text("horizon_steps = 1\n")
    assert main(["synth", "--config", str(tmp_path / "bad.toml"), "--out", str(tmp_path / "x.jsonl")]) == 1
