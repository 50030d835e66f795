import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chaincohort.cohort import build_flow_ledger, snapshot_vector
from chaincohort.ingest import PriceError, PriceSeries
from chaincohort.returns import (
    ReturnDistribution,
    b2m_density,
    b2m_distribution,
    centered_moving,
    daily_return,
    pl_aggregates,
    pnl_distribution,
    realized_aggregates_series,
)
from chaincohort.synth import random_ledger, synthetic_prices
from conftest import GRID, T0, coinbase, spend
from oracles import replay_flows


def prices_from(start, *values):
    return PriceSeries(start, np.array(values, dtype=float))


def dist(returns, weights, kind="b2m"):
    return ReturnDistribution(kind, 0, np.array(returns, dtype=float), np.array(weights, dtype=np.int64))


# -- daily returns ----------------------------------------------------------------------

def test_daily_return_examples():
    p = prices_from(0, 100, 200, *[150] * 8, 200)
    assert daily_return(0, 1, p) == pytest.approx(math.log(2))
    assert daily_return(1, 10, p) == 0.0
    assert daily_return(0, 10, p) == pytest.approx(math.log(2) / 10)
    assert daily_return(0, 1, p, step_days=7) == pytest.approx(math.log(2) / 7)
    with pytest.raises(ValueError):
        daily_return(3, 3, p)
    with pytest.raises(PriceError):
        daily_return(0, 11, p)


# -- B2M ------------------------------------------------------------------------------

def two_cohort_ledger():
    recs = [coinbase("a", 0, 30), coinbase("b", 1, 70), coinbase("c", 2, 1)]
    return build_flow_ledger(recs, GRID)


def test_b2m_two_cohorts_hand_sum():
    # tau=0 at -0.1 per day over 2 days, tau=1 at +0.2 over 1 day
    p2 = 100.0
    p = prices_from(T0, p2 * math.exp(0.2), p2 * math.exp(-0.2), p2)
    d = b2m_distribution(two_cohort_ledger(), p, T0 + 2)
    assert d.weights.tolist() == [30, 70]
    assert np.allclose(d.returns, [-0.1, 0.2], atol=1e-15)
    assert d.cdf(0.0) == pytest.approx(0.3)
    lo, hi = d.returns
    assert d.cdf(lo) == pytest.approx(0.3) and d.cdf(np.nextafter(lo, -1)) == 0.0 and d.cdf(hi) == 1.0


def test_b2m_all_in_profit():
    p = prices_from(T0, 10, 20, 40)
    assert b2m_distribution(two_cohort_ledger(), p, T0 + 2).cdf(0.0) == 0.0


def test_b2m_single_cohort_is_unit_step():
    L = build_flow_ledger([coinbase("a", 0, 5), coinbase("b", 4, 1)], GRID)
    p = prices_from(T0, 10, 11, 12, 13, 20)
    d = b2m_distribution(L, p, T0 + 4)
    r = math.log(2) / 4
    assert d.cdf(r - 1e-12) == 0.0 and d.cdf(r) == 1.0


def test_b2m_missing_prices():
    with pytest.raises(PriceError):
        b2m_distribution(two_cohort_ledger(), prices_from(T0 + 1, 1, 1), T0 + 2)


# -- density ------------------------------------------------------------------------

def test_density_unit_mass():
    den = b2m_density(dist([0.0], [5]), bandwidth=0.01)
    assert den.integral() == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(den.f, den.f[::-1], atol=1e-12)
    assert den.x[np.argmax(den.f)] == pytest.approx(0.0, abs=den.bandwidth / 8)


def test_density_bimodal_equal_lobes():
    den = b2m_density(dist([-1.0, 1.0], [7, 7]), bandwidth=0.05)
    left, right = den.x < 0, den.x > 0
    lobe_l = np.trapezoid(den.f[left], den.x[left])
    lobe_r = np.trapezoid(den.f[right], den.x[right])
    assert lobe_l == pytest.approx(lobe_r, abs=1e-6)
    assert den.f[np.argmin(np.abs(den.x))] < 1e-6 * den.f.max()


def test_density_degenerate_needs_bandwidth():
    with pytest.raises(ValueError):
        b2m_density(dist([0.3], [1]))
    with pytest.raises(ValueError):
        b2m_density(dist([], []))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_density_integrates_to_one(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 60))
    d = dist(rng.normal(0, 0.05, n), rng.integers(1, 10**9, n))
    assert b2m_density(d).integral() == pytest.approx(1.0, abs=1e-6)


# -- aggregates -------------------------------------------------------------------------

def test_pl_aggregate_examples():
    a = pl_aggregates(dist([0.1], [3]))
    assert (a.f_p, a.Pbar, a.Lbar, a.L) == (1.0, pytest.approx(0.1), None, 0.0)
    a = pl_aggregates(dist([-0.1, 0.1], [5, 5]))
    assert a.f_p == 0.5 and a.Pbar == pytest.approx(0.1) and a.Lbar == pytest.approx(0.1)
    a = pl_aggregates(dist([-0.2, 0.1], [3, 7]))
    assert a.f_p == pytest.approx(0.7)
    assert a.P == pytest.approx(0.07, abs=1e-15) and a.L == pytest.approx(0.06, abs=1e-15)
    assert a.Pbar == pytest.approx(0.1, abs=1e-15) and a.Lbar == pytest.approx(0.2, abs=1e-15)


def test_break_even_is_not_profit():
    a = pl_aggregates(dist([0.0, 0.2], [1, 1]))
    assert a.f_p == 0.5 and a.L == 0.0 and a.Lbar == 0.0
    with pytest.raises(ValueError):
        pl_aggregates(dist([], []))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.integers(1, 10**12)), min_size=1, max_size=50))
def test_profit_loss_identities(sample):
    r, w = zip(*sample)
    a = pl_aggregates(dist(r, w))
    assert a.P >= 0 and a.L >= 0 and 0 <= a.f_p <= 1
    if a.Pbar is not None:
        assert abs(a.P - a.f_p * a.Pbar) <= 1e-12
    if a.Lbar is not None:
        assert abs(a.L - (1 - a.f_p) * a.Lbar) <= 1e-12


# -- realized ---------------------------------------------------------------------------

def test_pnl_single_cohort_sold_after_doubling():
    L = build_flow_ledger([coinbase("a", 0, 100), spend("b", 1, [("a", 0)], 100)], GRID)
    d = pnl_distribution(L, prices_from(T0, 50, 100), T0 + 1)
    assert d.weights.tolist() == [100] and d.returns[0] == pytest.approx(math.log(2))


def test_pnl_two_death_flows_hand_replay():
    recs = [coinbase("a", 0, 40), coinbase("b", 1, 60), coinbase("z", 3, 1),
            spend("c", 3, [("a", 0), ("b", 0)], 100),
            spend("d", 3, [("c", 0)], 100)]  # same-step churn
    L = build_flow_ledger(recs, GRID)
    p = prices_from(T0, 100, 400, 100, 200)
    d = pnl_distribution(L, p, T0 + 3)
    assert d.weights.tolist() == [40, 60] and d.churn == 100
    assert np.allclose(d.returns, [math.log(2) / 3, math.log(0.5) / 2])
    assert d.cdf(0.0) == pytest.approx(0.6)


def test_pnl_empty_when_nothing_traded(single_mint):
    d = pnl_distribution(single_mint, prices_from(T0, 1.0), T0)
    assert d.empty


def ledger_and_span(n, seed):
    recs = random_ledger(n, seed)
    L = build_flow_ledger(recs, GRID)
    return recs, L


def test_constant_price_no_profit():
    _, L = ledger_and_span(800, 1)
    s = realized_aggregates_series(L, prices_from(L.start, *[7.0] * L.length))
    fp = s.column("f_p")
    traded = ~np.isnan(fp)
    assert traded.sum() > 10 and np.all(fp[traded] == 0) and np.all(s.column("L")[traded] == 0)


def test_rising_price_all_profit():
    _, L = ledger_and_span(800, 2)
    s = realized_aggregates_series(L, PriceSeries(L.start, np.exp(0.01 * np.arange(L.length))))
    fp = s.column("f_p")
    assert np.all(fp[~np.isnan(fp)] == 1.0)
    assert np.allclose(s.column("Pbar")[~np.isnan(fp)], 0.01)


@pytest.mark.parametrize("seed", range(3))
def test_realized_series_matches_brute_force(seed):
    recs, L = ledger_and_span(1000, seed)
    p = synthetic_prices(GRID, L.start, L.length, seed=seed)
    s = realized_aggregates_series(L, p)
    deaths, _ = replay_flows(recs, GRID.epoch, GRID.step)
    for i, t in enumerate(s.t):
        flows = [(b, a) for (b, u), a in deaths.items() if u == t and b < t]
        if not flows:
            assert int(t) in s.skipped and np.all(np.isnan(s.values[i]))
            continue
        total = sum(a for _, a in flows)
        rets = [(math.log(p(int(t)) / p(b)) / (t - b), a) for b, a in flows]
        gain = sum(a for r, a in rets if r > 0)
        assert s.column("f_p")[i] == pytest.approx(gain / total, abs=1e-12)
        assert s.column("P")[i] == pytest.approx(sum(r * a for r, a in rets if r > 0) / total, abs=1e-12)
        assert s.column("L")[i] == pytest.approx(-sum(r * a for r, a in rets if r <= 0) / total, abs=1e-12)


def test_centered_moving_window():
    v = np.arange(7, dtype=float).reshape(-1, 1)
    v[3] = np.nan
    mean, med = centered_moving(v, 3)
    assert np.isnan(mean[0, 0]) and np.isnan(mean[6, 0])
    assert mean[:, 0].tolist()[1:6] == [1.0, 1.5, 3.0, 4.5, 5.0]
    assert med[2, 0] == 1.5
    assert np.all(np.isnan(centered_moving(v, 9)[0]))


# -- sign coherence -----------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-6, 2.0))
def test_raising_current_price_never_lowers_profit_fraction(seed, bump):
    recs, L = ledger_and_span(400, seed)
    p = synthetic_prices(GRID, L.start, L.length, seed=seed)
    t = L.horizon
    base = b2m_distribution(L, p, t)
    if base.empty:
        return
    raised = PriceSeries(p.start, np.concatenate((p.values[:-1], [p.values[-1] * math.exp(bump)])))
    a, b = pl_aggregates(base), pl_aggregates(b2m_distribution(L, raised, t))
    assert b.f_p >= a.f_p
    # enough of a raise to lift the shallowest loss strictly increases f_p
    losing = base.returns <= 0
    if losing.any():
        ages = (t - L.start) - np.flatnonzero(snapshot_vector(L, t)[:-1] > 0)
        need = float(np.max((-base.returns * ages)[losing]))
        lifted = PriceSeries(p.start, np.concatenate((p.values[:-1], [p.values[-1] * math.exp(need + 1e-9)])))
        c = pl_aggregates(b2m_distribution(L, lifted, t))
        assert c.f_p > a.f_p
    else:
        assert b.f_p == 1.0

