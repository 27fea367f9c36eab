"""Wholesale price forecasting.

Category-level prices use a self-contained ARIMA(p,d,q) estimated by
conditional sum of squares (CSS): difference d times, then compute
one-step residuals recursively with pre-sample values set to the
differenced-series mean and pre-sample residuals set to zero.  Orders are
compared by AIC built on the concentrated Gaussian likelihood.

Item-level prices use the historical mean of a trailing window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date as Date
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .dataio import Dataset
from .errors import (
    InvalidOrderError,
    NoConvergentFitError,
    NoDataError,
    NonStationaryFitError,
    SeriesTooShortError,
)

_STATIONARITY_TOL = 1e-6
_SIGMA2_FLOOR = 1e-300


@dataclass(frozen=True)
class PriceSeries:
    """A time-ordered price series for one category or item."""

    label: str
    dates: tuple[Date, ...]
    prices: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.dates) != len(self.prices):
            raise ValueError("dates and prices must have equal length")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")


@dataclass(frozen=True)
class ArimaFit:
    """A CSS-estimated ARIMA model, ready to forecast.

    n_obs is the original series length; n_eff = n_obs - d - p is the
    residual count entering sigma2.  diff_series / residuals / diff_tails
    carry the state needed by forecast().
    """

    order: tuple[int, int, int]
    ar_coeffs: tuple[float, ...]
    ma_coeffs: tuple[float, ...]
    intercept: float
    intercept_estimated: bool
    sigma2: float
    aic: float
    loglik: float
    n_obs: int
    n_eff: int
    diff_series: np.ndarray = field(compare=False, repr=False, default=None)
    residuals: np.ndarray = field(compare=False, repr=False, default=None)
    diff_tails: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "ar_coeffs": list(self.ar_coeffs),
            "ma_coeffs": list(self.ma_coeffs),
            "intercept": self.intercept,
            "intercept_estimated": self.intercept_estimated,
            "sigma2": self.sigma2,
            "aic": self.aic,
            "loglik": self.loglik,
            "n_obs": self.n_obs,
            "n_eff": self.n_eff,
        }


def category_wholesale_series(
    dataset: Dataset, category: str, granularity: str = "day"
) -> PriceSeries:
    """Weighted average wholesale price of a category per day (or month).

    Weights are (1 + loss_j) * kg sold of each item; the wholesale price
    of a sale row is the most recent quote on or before the sale date.
    Rows with no resolvable quote are skipped.
    """
    if granularity not in ("day", "month"):
        raise ValueError(f"granularity must be day or month, got {granularity!r}")
    items = set(dataset.items_in(category))
    if not items:
        raise NoDataError(f"unknown or empty category {category!r}")
    num: dict = {}
    den: dict = {}
    for t in dataset.transactions:
        if t.is_return or t.item_code not in items:
            continue
        wholesale = dataset.wholesale_recent(t.item_code, t.date)
        if wholesale is None:
            continue
        key = t.date if granularity == "day" else Date(t.date.year, t.date.month, 1)
        weight = (1.0 + dataset.loss_rate(t.item_code)) * t.quantity_kg
        num[key] = num.get(key, 0.0) + weight * wholesale
        den[key] = den.get(key, 0.0) + weight
    days = sorted(k for k in den if den[k] > 0)
    if not days:
        raise NoDataError(f"no priced sales for category {category!r}")
    return PriceSeries(
        label=category,
        dates=tuple(days),
        prices=tuple(num[d] / den[d] for d in days),
    )


def difference(values: Sequence[float], d: int) -> np.ndarray:
    """d-fold first differences; output is d elements shorter."""
    if d < 0 or int(d) != d:
        raise InvalidOrderError(f"differencing degree must be a nonnegative int, got {d}")
    x = np.asarray(values, dtype=float)
    if x.size <= d:
        raise SeriesTooShortError(f"need length > {d}, got {x.size}")
    return np.diff(x, n=d) if d else x.copy()


def _inverse_root_radius(coeffs: Sequence[float], kind: str) -> float:
    """Spectral radius of the companion matrix of an AR or MA polynomial.

    Degrees 1 and 2 use closed forms; higher degrees fall back to
    np.roots.  Radius < 1 means stationary (AR) or invertible (MA).
    """
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        return 0.0
    if not np.all(np.isfinite(c)):
        return math.inf
    # companion polynomial z^k - c1 z^(k-1) - ... (AR) or z^k + c1 z^(k-1) + ... (MA)
    signed = -c if kind == "ar" else c
    if c.size == 1:
        return abs(float(signed[0]))
    if c.size == 2:
        b1, b0 = float(signed[0]), float(signed[1])
        disc = b1 * b1 - 4.0 * b0
        if disc >= 0.0:
            s = math.sqrt(disc)
            return max(abs((-b1 + s) / 2.0), abs((-b1 - s) / 2.0))
        return math.sqrt(b0)  # |complex pair| = sqrt(product of roots)
    roots = np.roots(np.r_[1.0, signed])
    return float(np.max(np.abs(roots))) if roots.size else 0.0


def _lag_matrix(w: np.ndarray, mean_w: float, p: int) -> np.ndarray:
    """Columns are w lagged 1..p, with pre-sample values set to mean_w."""
    if p == 0:
        return np.empty((w.size, 0))
    w_ext = np.concatenate([np.full(p, mean_w), w])
    return np.column_stack([w_ext[p - i : p - i + w.size] for i in range(1, p + 1)])


def _css_residuals(
    w: np.ndarray, mean_w: float, ar: np.ndarray, ma: np.ndarray, intercept: float,
    lags: np.ndarray | None = None,
) -> np.ndarray:
    """One-step residuals with mean-padded pre-sample values, zero pre-sample errors."""
    z = w - intercept
    if ar.size:
        if lags is None:
            lags = _lag_matrix(w, mean_w, ar.size)
        z = z - lags @ ar
    if ma.size:
        z = lfilter([1.0], np.r_[1.0, ma], z)
    return z


def _ar_ols(w: np.ndarray, mean_w: float, p: int, with_intercept: bool):
    """Closed-form AR(p) regression on the mean-padded series."""
    cols = [_lag_matrix(w, mean_w, p)] if p else []
    if with_intercept:
        cols.append(np.ones((w.size, 1)))
    if not cols:
        return np.zeros(0), 0.0
    design = np.concatenate(cols, axis=1)
    coef, _, _, _ = np.linalg.lstsq(design, w, rcond=None)
    ar = coef[:p]
    intercept = float(coef[p]) if with_intercept else 0.0
    return ar, intercept


def _hannan_rissanen(
    w: np.ndarray, mean_w: float, p: int, q: int, with_intercept: bool
) -> np.ndarray:
    """Two-stage regression start: long-AR residuals proxy the innovations."""
    m = min(10, max(p + q, w.size // 4))
    ar_long, c_long = _ar_ols(w, mean_w, m, True)
    proxy = w - c_long - _lag_matrix(w, mean_w, m) @ ar_long
    cols = []
    if p:
        cols.append(_lag_matrix(w, mean_w, p))
    if q:
        e_ext = np.concatenate([np.zeros(q), proxy])
        cols.append(
            np.column_stack([e_ext[q - j : q - j + w.size] for j in range(1, q + 1)])
        )
    if with_intercept:
        cols.append(np.ones((w.size, 1)))
    design = np.concatenate(cols, axis=1)
    coef, _, _, _ = np.linalg.lstsq(design, w, rcond=None)
    theta = np.zeros(p + q + (1 if with_intercept else 0))
    theta[: coef.size] = coef
    return theta


def fit_arima(
    series: Sequence[float], order: tuple[int, int, int], seed: int = 0
) -> ArimaFit:
    """CSS fit of one (p,d,q) order.

    Multi-start Nelder-Mead over (ar, ma, intercept); stationarity and
    invertibility are enforced by rejecting coefficient vectors whose
    companion spectral radius reaches 1 - 1e-6.  The intercept is
    estimated only when d = 0.
    """
    p, d, q = order
    if min(p, d, q) < 0 or any(int(v) != v for v in order):
        raise InvalidOrderError(f"order components must be nonnegative ints: {order}")
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 10 + p + d + q:
        raise SeriesTooShortError(
            f"order {order} needs at least {10 + p + d + q} observations, got {n}"
        )
    w = difference(x, d)
    mean_w = float(w.mean())
    with_intercept = d == 0
    n_eff = n - d - p

    def unpack(theta: np.ndarray):
        ar = theta[:p]
        ma = theta[p : p + q]
        c = float(theta[p + q]) if with_intercept else 0.0
        return ar, ma, c

    def admissible(ar: np.ndarray, ma: np.ndarray) -> bool:
        return (
            _inverse_root_radius(ar, "ar") < 1.0 - _STATIONARITY_TOL
            and _inverse_root_radius(ma, "ma") < 1.0 - _STATIONARITY_TOL
        )

    lags = _lag_matrix(w, mean_w, p)

    def ssr_of(theta: np.ndarray) -> float:
        ar, ma, c = unpack(theta)
        resid = _css_residuals(w, mean_w, ar, ma, c, lags)
        value = float(resid @ resid)
        return value if math.isfinite(value) else 1e300

    def objective(theta: np.ndarray) -> float:
        ar, ma, c = unpack(theta)
        r_ar = _inverse_root_radius(ar, "ar")
        r_ma = _inverse_root_radius(ma, "ma")
        if r_ar >= 1.0 - _STATIONARITY_TOL or r_ma >= 1.0 - _STATIONARITY_TOL:
            return 1e200 * (1.0 + r_ar + r_ma)
        return ssr_of(theta)

    dim = p + q + (1 if with_intercept else 0)
    ar_seed, c_seed = _ar_ols(w, mean_w, p, with_intercept)
    seed_admissible = _inverse_root_radius(ar_seed, "ar") < 1.0 - _STATIONARITY_TOL
    if not seed_admissible and p:
        ar_seed = ar_seed * (0.98 / max(1e-12, float(np.max(np.abs(ar_seed)))))

    if dim == 0:
        ar_v, ma_v, c_v = np.zeros(0), np.zeros(0), 0.0
    elif q == 0 and seed_admissible:
        # pure AR regression: the OLS solution is the exact SSR minimum
        ar_v, ma_v, c_v = ar_seed, np.zeros(0), c_seed
    else:
        best_theta, best_val = None, math.inf
        starts = [np.zeros(dim)]
        if with_intercept:
            starts[0] = np.r_[np.zeros(p + q), [mean_w]]
        starts.append(_hannan_rissanen(w, mean_w, p, q, with_intercept))
        rng = np.random.default_rng(seed)
        t = rng.uniform(-0.5, 0.5, size=dim)
        if with_intercept:
            t[-1] = mean_w + rng.normal(0.0, 0.1 * (abs(mean_w) + 1.0))
        starts.append(t)
        for t in starts:
            t = np.asarray(t, dtype=float)
            guard = 0
            while not admissible(*unpack(t)[:2]) and guard < 60:
                t = t.copy()
                t[: p + q] *= 0.7
                guard += 1
            res = minimize(
                objective,
                t,
                method="Nelder-Mead",
                options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 150 * max(1, dim)},
            )
            if res.fun < best_val:
                best_theta, best_val = res.x.copy(), float(res.fun)
        if best_theta is None or best_val >= 1e200:
            raise NonStationaryFitError(f"no admissible coefficients for order {order}")
        # one polishing pass from the winner
        res = minimize(
            objective,
            best_theta,
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 200 * max(1, dim)},
        )
        if res.fun < best_val:
            best_theta, best_val = res.x.copy(), float(res.fun)
        ar_v, ma_v, c_v = unpack(best_theta)
        if not admissible(ar_v, ma_v):
            raise NonStationaryFitError(f"no admissible coefficients for order {order}")
    resid = _css_residuals(w, mean_w, np.asarray(ar_v), np.asarray(ma_v), c_v)

    ssr = float(resid @ resid)
    sigma2 = max(ssr / n_eff, _SIGMA2_FLOOR)
    loglik = -(n_eff / 2.0) * (math.log(2.0 * math.pi * sigma2) + 1.0)
    k = p + q + 1 + (1 if with_intercept else 0)
    aic_value = 2.0 * k - 2.0 * loglik
    tails = tuple(float(np.diff(x, n=level)[-1]) for level in range(d))
    return ArimaFit(
        order=(p, d, q),
        ar_coeffs=tuple(float(v) for v in ar_v),
        ma_coeffs=tuple(float(v) for v in ma_v),
        intercept=c_v,
        intercept_estimated=with_intercept,
        sigma2=sigma2,
        aic=aic_value,
        loglik=loglik,
        n_obs=n,
        n_eff=n_eff,
        diff_series=w,
        residuals=resid,
        diff_tails=tails,
    )


def aic(fit: ArimaFit) -> float:
    """AIC = 2k - 2 lnL with the concentrated Gaussian likelihood."""
    k = fit.order[0] + fit.order[2] + 1 + (1 if fit.intercept_estimated else 0)
    return 2.0 * k - 2.0 * fit.loglik


def select_order(
    series: Sequence[float],
    p_range: Iterable[int] = range(0, 4),
    d_range: Iterable[int] = range(0, 3),
    q_range: Iterable[int] = range(0, 4),
    seed: int = 0,
) -> tuple[int, int, int]:
    """Minimum-AIC order over the grid.

    AIC ties (1e-9 relative) break by smaller p+q, then smaller d, then
    smaller p.
    """
    best: tuple[int, int, int] | None = None
    best_aic = math.inf
    for d in sorted(set(d_range)):
        for p in sorted(set(p_range)):
            for q in sorted(set(q_range)):
                try:
                    fit = fit_arima(series, (p, d, q), seed=seed)
                except (SeriesTooShortError, NonStationaryFitError):
                    continue
                if best is None:
                    best, best_aic = (p, d, q), fit.aic
                    continue
                tol = 1e-9 * max(1.0, abs(best_aic))
                if fit.aic < best_aic - tol:
                    best, best_aic = (p, d, q), fit.aic
                elif fit.aic <= best_aic + tol:
                    cand = (p + q, d, p)
                    cur = (best[0] + best[2], best[1], best[0])
                    if cand < cur:
                        best, best_aic = (p, d, q), fit.aic
    if best is None:
        raise NoConvergentFitError("no order in the grid produced a fit")
    return best


def forecast(fit: ArimaFit, horizon: int) -> np.ndarray:
    """Recursive h-step mean forecasts, integrated back to the price scale.

    Future residuals are 0.  No clamping happens here; callers that need
    positive prices apply their own floor.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p, d, q = fit.order
    hist = list(fit.diff_series)
    resid = list(fit.residuals)
    out = []
    for _ in range(horizon):
        value = fit.intercept
        for i in range(1, p + 1):
            value += fit.ar_coeffs[i - 1] * hist[-i]
        for j in range(1, q + 1):
            value += fit.ma_coeffs[j - 1] * resid[-j]
        hist.append(value)
        resid.append(0.0)
        out.append(value)
    path = np.asarray(out)
    for level in reversed(range(d)):
        path = fit.diff_tails[level] + np.cumsum(path)
    return path


def mean_forecast(series: PriceSeries, window: int = 7) -> float:
    """Mean of the last `window` observations (whole series if shorter)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if not series.prices:
        raise NoDataError(f"series {series.label!r} is empty")
    tail = series.prices[-window:]
    return float(sum(tail) / len(tail))
