import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chaincohort.cohort import build_flow_ledger, transition_probability
from chaincohort.scaling import (
    DEFAULT_WINDOWS,
    PowerLawError,
    Sampling,
    alpha_return_regression,
    alpha_series,
    avg_transition,
    powerlaw_fit,
    transition_curve,
)
from chaincohort.synth import SynthConfig, synthesize_ledger
from oracles import ols_slope

Z = np.arange(1, 201)


def weekly(H, issuance, seed=0, **kw):
    cfg = SynthConfig(horizon_steps=H, issuance_per_step=issuance, seed=seed, step_days=7, **kw)
    return cfg, build_flow_ledger(synthesize_ledger(cfg), cfg.grid)


# -- fitter ------------------------------------------------------------------------------

def test_default_sweep_has_76_fits():
    fit = powerlaw_fit(Z, Z ** -0.87)
    assert fit.n_fits == 76 and fit.windows[0] == (1, 125) and fit.windows[-1] == (1, 200)


def test_noiseless_power_law():
    fit = powerlaw_fit(Z, Z ** -0.87)
    assert fit.alpha == pytest.approx(0.87, abs=1e-9)
    assert fit.alpha_std < 1e-12 and np.all(fit.r2 > 1 - 1e-12)
    assert fit.beta == pytest.approx(0.0, abs=1e-9)


def test_constant_gives_zero_exponent():
    fit = powerlaw_fit(Z, np.full(Z.size, 7.0))
    assert fit.alpha == pytest.approx(0.0, abs=1e-12)
    assert fit.beta == pytest.approx(np.log(7.0))


@pytest.mark.parametrize("seed", range(5))
def test_lognormal_noise(seed):
    y = Z ** -1.5 * np.exp(np.random.default_rng(seed).normal(0, 0.1, Z.size))
    assert powerlaw_fit(Z, y).alpha == pytest.approx(1.5, abs=0.05)


def test_matches_plain_ols_per_window():
    rng = np.random.default_rng(4)
    y = Z ** -1.2 * np.exp(rng.normal(0, 0.3, Z.size))
    fit = powerlaw_fit(Z, y)
    for (lo, hi), a in zip(fit.windows[::15], fit.alphas[::15]):
        sel = (Z >= lo) & (Z <= hi)
        slope, _ = ols_slope(np.log(Z[sel]).tolist(), np.log(y[sel]).tolist())
        assert a == pytest.approx(-slope, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-6, 1e6))
def test_scale_covariance(seed, c):
    y = Z ** -0.9 * np.exp(np.random.default_rng(seed).normal(0, 0.5, Z.size))
    a, b = powerlaw_fit(Z, y), powerlaw_fit(Z, c * y)
    assert np.allclose(a.alphas, b.alphas, rtol=0, atol=1e-10)
    assert b.beta - a.beta == pytest.approx(np.log(c), abs=1e-9)


def test_drops_non_positive_and_refuses_short_windows():
    y = Z ** -1.0
    y[:3] = 0.0
    y[10] = -1
    fit = powerlaw_fit(Z, y, windows=((1, 6), (1, 9), (1, 50)))
    assert fit.dropped == 4 and fit.refused == 1
    assert fit.windows == ((1, 9), (1, 50))
    with pytest.raises(PowerLawError):
        powerlaw_fit(Z, np.zeros(Z.size))
    with pytest.raises(PowerLawError):
        powerlaw_fit([1, 2, 3], [1.0, 0.5, 0.3])
    with pytest.raises(ValueError):
        powerlaw_fit([1, 2], [1.0])


# -- transition probabilities ----------------------------------------------------------

def test_recovered_exponent():
    _, L = weekly(200, 10**7, alpha=0.87)
    avg = avg_transition(L)
    assert avg.fit.n_fits == 76
    assert avg.fit.alpha == pytest.approx(0.87, abs=0.03) and avg.fit.alpha_std < 0.02


def test_converges_to_generator_law():
    cfg, L = weekly(200, 10**7, seed=2, alpha=0.87)
    avg = avg_transition(L)
    z = np.arange(1, 101)
    assert np.max(np.abs(avg.pi_mean[:100] - cfg.hazard(z * 0, z))) < 0.01


def test_memoryless_ledger():
    H = 150
    _, L = weekly(H, 10**6, seed=1, pi_table={z: 0.05 for z in range(1, H)})
    avg = avg_transition(L, windows=((1, 100),))
    assert avg.fit.alpha == pytest.approx(0.0, abs=0.01)


def test_single_time_sampling_is_the_curve():
    _, L = weekly(80, 10**5, seed=3, alpha=1.1)
    t = L.start + 60
    avg = avg_transition(L, Sampling(t, t), windows=((1, 60),), min_times=1)
    ages, rates = transition_curve(L, t)
    assert np.array_equal(avg.pi_mean[ages - 1], rates)
    for z, r in zip(ages[::7], rates[::7]):
        assert r == transition_probability(L, t - int(z), t)


def test_gaps_and_minimum_samples():
    _, L = weekly(40, 10**4, alpha=0.9)
    with pytest.raises(ValueError):
        avg_transition(L, Sampling(L.start + 1, L.start + 10))
    # every coin dies at age one, so older cohorts are empty and undefined
    _, L = weekly(40, 10**4, alpha=float("inf"))
    avg = avg_transition(L, windows=((1, 30),))
    assert avg.pi_mean[0] == 1.0 and avg.gaps.tolist() == list(range(2, 40))
    assert avg.fit is None


# -- alpha_t ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def stationary_alpha():
    _, L = weekly(400, 10**6, alpha=0.87)
    return alpha_series(L, Sampling(L.start + 200, L.horizon))


def test_stationary_alpha_series_is_flat(stationary_alpha):
    s = stationary_alpha
    assert not s.flagged and np.all(np.abs(s.alpha_mean - 0.87) < 0.01)


def test_stationary_alpha_std_band_covers_truth(stationary_alpha):
    # The per-time spread over nested windows understates the sampling error
    # of the exponent; see the decisions ledger. Kept at the stated threshold.
    s = stationary_alpha
    covered = np.abs(s.alpha_mean - 0.87) <= s.alpha_std
    assert covered.mean() >= 0.9


def test_alpha_series_flags_quiet_times():
    _, L = weekly(40, 10**4, alpha=0.9)
    s = alpha_series(L, Sampling(L.start + 1, L.horizon), windows=((1, 30),))
    assert s.t.size == L.horizon - L.start
    early = s.t < L.start + 5  # fewer than five ages alive
    assert set(s.t[early].tolist()) <= set(s.flagged) and np.all(np.isnan(s.alpha_mean[early]))
    assert np.all(np.isfinite(s.alpha_mean[~early]))


# -- regression ------------------------------------------------------------------------------

def test_regression_recovers_slope():
    rng = np.random.default_rng(0)
    t = np.arange(400)
    r = rng.normal(0, 0.01, t.size)
    alpha = -2 * r + rng.normal(0, 0.002, t.size)
    before, after = alpha_return_regression(t, alpha, t, r, 200)
    assert before.n == 200 and after.n == 200
    for c in (before, after):
        assert c.slope == pytest.approx(-2, abs=0.1) and c.correlation < -0.9


def test_independent_series_uncorrelated():
    small = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        t = np.arange(1000)
        before, _ = alpha_return_regression(t, rng.normal(size=1000), t, rng.normal(size=1000), 500)
        small += abs(before.correlation) < 0.1
    assert small >= 95


def test_regression_alignment_and_errors():
    t = np.arange(10)
    alpha = np.where(t == 4, np.nan, t * 1.0)
    before, after = alpha_return_regression(t, alpha, t + 2, np.arange(10.0), 6)
    # common indices 2..9 without 4: before = {2,3,5}, after = {6..9}
    assert (before.n, after.n) == (3, 4)
    with pytest.raises(ValueError):
        alpha_return_regression(t, t * 1.0, t, t * 1.0, 2)
    with pytest.raises(ValueError):
        alpha_return_regression(t, t * 1.0, t, t * 1.0, 50)


def test_default_windows_constant():
    assert len(DEFAULT_WINDOWS) == 76
