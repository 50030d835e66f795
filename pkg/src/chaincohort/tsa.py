"""Unit-root, autocorrelation, ARMA and VAR tools for the holder series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

# MacKinnon (2010) response surfaces for one variable: cv(T) = b0 + b1/T + b2/T^2 + b3/T^3
_ADF_CRIT = {
    "n": {0.01: (-2.56574, -2.2358, -3.627, 0.0),
          0.05: (-1.94100, -0.2686, -3.365, 31.223),
          0.10: (-1.61682, 0.2656, -2.714, 25.364)},
    "c": {0.01: (-3.43035, -6.5393, -16.786, -79.433),
          0.05: (-2.86154, -2.8903, -4.234, -40.040),
          0.10: (-2.56677, -1.5384, -2.809, 0.0)},
    "ct": {0.01: (-3.95877, -9.0531, -28.428, -134.155),
           0.05: (-3.41049, -4.3904, -9.036, -45.374),
           0.10: (-3.12705, -2.5856, -3.925, -22.38)},
}
_REGRESSION_ALIASES = {"none": "n", "n": "n", "nc": "n", "drift": "c", "c": "c",
                       "drift+trend": "ct", "trend": "ct", "ct": "ct"}


class SingularDesignError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class OLSResult:
    coef: np.ndarray
    se: np.ndarray
    resid: np.ndarray

    @property
    def tstat(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.coef / self.se


def ols(X: np.ndarray, y: np.ndarray) -> OLSResult:
    n, k = X.shape
    if n <= k or np.linalg.matrix_rank(X) < k:
        raise SingularDesignError("regressor matrix is singular")
    q, r = np.linalg.qr(X)
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    sigma2 = resid @ resid / (n - k)
    rinv = np.linalg.inv(r)
    se = np.sqrt(sigma2 * np.einsum("ij,ij->i", rinv, rinv))
    return OLSResult(coef, se, resid)


def adf_critical_value(regression: str, nobs: int, level: float = 0.05) -> float:
    b = _ADF_CRIT[_REGRESSION_ALIASES[regression]][level]
    return b[0] + b[1] / nobs + b[2] / nobs**2 + b[3] / nobs**3


def schwert_lags(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


@dataclass(frozen=True)
class AdfResult:
    t_stat: float
    critical_5: float
    lags: int
    nobs: int
    regression: str

    @property
    def reject_at_95(self) -> bool:
        return self.t_stat < self.critical_5


def adf_test(y, regression: str = "drift", lags: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller test of a unit root in ``y``.

    Regresses ``dy_t`` on ``y_{t-1}``, ``lags`` lagged differences and the
    deterministic terms of ``regression`` (none, drift, drift+trend).
    """
    y = np.asarray(y, dtype=float)
    reg = _REGRESSION_ALIASES[regression]
    p = schwert_lags(y.size) if lags is None else int(lags)
    if y.size <= p + 10:
        raise ValueError(f"series of length {y.size} too short for {p} lags")
    dy = np.diff(y)
    T = dy.size - p
    cols = [y[p:-1]]
    cols += [dy[p - j: dy.size - j] for j in range(1, p + 1)]
    if reg in ("c", "ct"):
        cols.append(np.ones(T))
    if reg == "ct":
        cols.append(np.arange(1, T + 1, dtype=float))
    res = ols(np.column_stack(cols), dy[p:])
    return AdfResult(float(res.tstat[0]), adf_critical_value(reg, T), p, T, reg)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    log_front = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        # series for P(a, x)
        term = total = 1.0 / a
        ap = a
        for _ in range(10_000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        return max(0.0, 1.0 - total * math.exp(log_front))
    # Lentz continued fraction for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(log_front) * h


def chi2_sf(x: float, dof: int) -> float:
    return gammainc_upper(dof / 2.0, x / 2.0)


def autocorrelation(y, max_lag: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    yc = y - y.mean()
    denom = yc @ yc
    if denom == 0:
        raise ValueError("autocorrelation of a constant series is undefined")
    return np.array([yc[k:] @ yc[: y.size - k] / denom for k in range(1, max_lag + 1)])


@dataclass(frozen=True)
class LjungBoxResult:
    q: float
    p_value: float
    lags: int


def ljung_box(y, max_lag: int) -> LjungBoxResult:
    y = np.asarray(y, dtype=float)
    n = y.size
    if n <= max_lag:
        raise ValueError("series must be longer than the lag count")
    rho = autocorrelation(y, max_lag)
    k = np.arange(1, max_lag + 1)
    q = float(n * (n + 2) * np.sum(rho**2 / (n - k)))
    return LjungBoxResult(q, chi2_sf(q, max_lag), max_lag)


# -- ARMA ---------------------------------------------------------------------

@dataclass(frozen=True)
class ArmaFit:
    p: int
    q: int
    ar: np.ndarray
    ma: np.ndarray
    mean: float
    sigma2: float
    loglik: float
    aic: float
    bic: float
    converged: bool


def _css_residuals(y: np.ndarray, ar: np.ndarray, ma: np.ndarray) -> np.ndarray:
    return lfilter(np.concatenate(([1.0], -ar)), np.concatenate(([1.0], ma)), y)


def _hannan_rissanen(y: np.ndarray, p: int, q: int) -> np.ndarray:
    if p + q == 0:
        return np.zeros(0)
    n = y.size
    m = min(max(p + q, int(round(math.log(n) ** 1.5))), n // 4)
    if q > 0:
        X = np.column_stack([y[m - j: n - j] for j in range(1, m + 1)])
        e = np.zeros(n)
        e[m:] = y[m:] - X @ np.linalg.lstsq(X, y[m:], rcond=None)[0]
    else:
        e = np.zeros(n)
        m = 0
    start = m + max(p, q)
    cols = [y[start - j: n - j] for j in range(1, p + 1)] + [e[start - j: n - j] for j in range(1, q + 1)]
    beta = np.linalg.lstsq(np.column_stack(cols), y[start:], rcond=None)[0]
    # pull the start inside the invertible region if needed
    for _ in range(20):
        ma = beta[p:]
        if q == 0 or np.all(np.abs(np.roots(np.concatenate(([1.0], ma)))) < 1.0):
            break
        beta[p:] *= 0.5
    return beta


def arma_css(y, p: int, q: int, condition: int | None = None) -> ArmaFit:
    """Conditional-sum-of-squares ARMA(p, q) fit of the demeaned series.

    The first ``condition`` residuals (default ``p``) are dropped so that
    models of different order can be compared on the same sample. The
    parameter count includes the mean and the innovation variance.
    """
    y = np.asarray(y, dtype=float)
    mu = float(y.mean())
    x = y - mu
    cond = p if condition is None else max(condition, p)
    n_eff = x.size - cond

    def css(theta: np.ndarray) -> float:
        # explosive trial parameters overflow; they are simply rejected
        with np.errstate(over="ignore", invalid="ignore"):
            e = _css_residuals(x, theta[:p], theta[p:])[cond:]
            v = float(e @ e)
        return v if math.isfinite(v) else 1e300

    theta0 = _hannan_rissanen(x, p, q)
    converged = True
    if theta0.size:
        res = minimize(css, theta0, method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-10 * max(1.0, css(theta0)),
                                "maxiter": 4000 * theta0.size, "maxfev": 4000 * theta0.size})
        theta, converged = res.x, bool(res.success)
    else:
        theta = theta0
    s = css(theta)
    sigma2 = s / n_eff
    loglik = -0.5 * n_eff * (math.log(2 * math.pi * sigma2) + 1.0)
    k = p + q + 2
    return ArmaFit(p, q, theta[:p].copy(), theta[p:].copy(), mu, sigma2, loglik,
                   2 * k - 2 * loglik, k * math.log(n_eff) - 2 * loglik, converged)


@dataclass(frozen=True)
class ArmaSelection:
    by_aic: ArmaFit
    by_bic: ArmaFit
    fits: dict[tuple[int, int], ArmaFit]
    skipped: tuple[tuple[int, int], ...] = field(default=())


def arma_select(y, max_p: int = 5, max_q: int = 5) -> ArmaSelection:
    """Grid search of ARMA orders by AIC and BIC on a common conditioning sample.

    Cells whose simplex search does not converge are skipped and listed.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 100:
        raise ValueError("ARMA order selection needs at least 100 points")
    fits, skipped = {}, []
    for p in range(max_p + 1):
        for q in range(max_q + 1):
            fit = arma_css(y, p, q, condition=max_p)
            if fit.converged and math.isfinite(fit.loglik):
                fits[(p, q)] = fit
            else:
                skipped.append((p, q))
    if not fits:
        raise ValueError("no ARMA order converged")
    by_aic = min(fits.values(), key=lambda f: (f.aic, f.p + f.q))
    by_bic = min(fits.values(), key=lambda f: (f.bic, f.p + f.q))
    return ArmaSelection(by_aic, by_bic, fits, tuple(skipped))


# -- VAR(1) -------------------------------------------------------------------

@dataclass(frozen=True)
class VarFit:
    """``y_t = c + A y_{t-1} + e_t``; row ``i`` of ``A`` is equation ``i``."""

    coef: np.ndarray
    intercept: np.ndarray
    se: np.ndarray
    intercept_se: np.ndarray
    nobs: int

    @property
    def tstat(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.coef / self.se


def var_fit(y1, y2) -> VarFit:
    y = np.column_stack((np.asarray(y1, dtype=float), np.asarray(y2, dtype=float)))
    if y.shape[0] < 50:
        raise ValueError("VAR fit needs at least 50 points")
    # an identically zero variable carries no information: its coefficient is
    # reported as 0 with undefined standard error instead of failing the fit
    live = [j for j in range(2) if np.any(y[:-1, j] != 0)]
    X = np.column_stack([y[:-1, j] for j in live] + [np.ones(y.shape[0] - 1)])
    coef = np.zeros((2, 2))
    se = np.full((2, 2), np.nan)
    c = np.zeros(2)
    cse = np.zeros(2)
    for i in range(2):
        res = ols(X, y[1:, i])
        coef[i, live], c[i] = res.coef[:-1], res.coef[-1]
        se[i, live], cse[i] = res.se[:-1], res.se[-1]
    return VarFit(coef, c, se, cse, y.shape[0] - 1)
