"""Windowed statistics. Every kernel takes the window values (NaN = missing)."""

from __future__ import annotations

import numpy as np
from scipy import stats

from tsagent.errors import ToolError


def finite(x: np.ndarray) -> np.ndarray:
    f = x[np.isfinite(x)]
    if f.size == 0:
        raise ToolError("ALL_MISSING", "no finite value in window")
    return f


def require_complete(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ToolError("HAS_MISSING", "window contains missing values")


def adjacent_pairs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = x[:-1], x[1:]
    ok = np.isfinite(a) & np.isfinite(b)
    return a[ok], b[ok]


def _pop_var(f: np.ndarray, mu: float) -> float:
    # a rounded mean leaves tiny residuals on constant input
    if f.max() == f.min():
        return 0.0
    return float(np.mean((f - mu) ** 2))


def linear_trend(x: np.ndarray) -> dict:
    y = x[np.isfinite(x)]
    n = y.size
    if n < 2:
        raise ToolError("WINDOW_TOO_SHORT", "linear_trend needs at least 2 finite points")
    t = np.arange(n, dtype=float)
    tm, ym = t - t.mean(), y - y.mean()
    sxx = float(tm @ tm)
    syy = float(ym @ ym)
    sxy = float(tm @ ym)
    slope = sxy / sxx
    intercept = float(y.mean() - slope * t.mean())
    # flat target: report no correlation instead of failing
    r = 0.0 if syy == 0.0 else min(1.0, max(-1.0, sxy / np.sqrt(sxx * syy)))
    if n == 2:
        pvalue = 1.0 if y[0] == y[1] else 0.0
        stderr = 0.0
    else:
        df = n - 2
        if abs(r) == 1.0:
            pvalue = 0.0
        else:
            tstat = r * np.sqrt(df / ((1.0 - r) * (1.0 + r)))
            pvalue = float(2.0 * stats.t.sf(abs(tstat), df))
        stderr = float(np.sqrt(max(0.0, (1.0 - r * r)) * syy / sxx / df))
    return {
        "slope": float(slope),
        "intercept": intercept,
        "rvalue": float(r),
        "pvalue": pvalue,
        "stderr": stderr,
    }


def standard_deviation(x: np.ndarray) -> dict:
    f = finite(x)
    return {"value": float(np.sqrt(_pop_var(f, float(f.mean()))))}


def _changes(x: np.ndarray) -> np.ndarray:
    a, b = adjacent_pairs(x)
    if a.size == 0:
        raise ToolError("WINDOW_TOO_SHORT", "needs at least one adjacent pair of finite values")
    return np.abs(b - a)


def mean_abs_change(x: np.ndarray) -> dict:
    return {"value": float(np.mean(_changes(x)))}


def absolute_sum_of_changes(x: np.ndarray) -> dict:
    return {"value": float(np.sum(_changes(x)))}


def ratio_beyond_r_sigma(x: np.ndarray, r: float) -> dict:
    if r < 0:
        raise ToolError("BAD_PARAM", "r must be >= 0")
    f = finite(x)
    mu = float(f.mean())
    sigma = np.sqrt(_pop_var(f, mu))
    return {"value": float(np.count_nonzero(np.abs(f - mu) > r * sigma) / f.size)}


def quantile(x: np.ndarray, q: float) -> dict:
    if not 0.0 <= q <= 1.0:
        raise ToolError("BAD_PARAM", "q must lie in [0, 1]")
    return {"value": float(np.quantile(finite(x), q))}


def change_quantiles(x: np.ndarray, q_l: float, q_h: float, is_abs: bool, agg: str) -> dict:
    if not 0.0 <= q_l < q_h <= 1.0:
        raise ToolError("BAD_PARAM", "need 0 <= q_l < q_h <= 1")
    if agg not in ("mean", "var"):
        raise ToolError("BAD_PARAM", "agg must be 'mean' or 'var'")
    f = finite(x)
    lo, hi = np.quantile(f, [q_l, q_h])
    with np.errstate(invalid="ignore"):
        inside = (x >= lo) & (x <= hi)
    keep = inside[:-1] & inside[1:]
    d = (x[1:] - x[:-1])[keep]
    if d.size == 0:
        return {"value": 0.0}
    if is_abs:
        d = np.abs(d)
    return {"value": float(np.mean(d) if agg == "mean" else np.var(d))}


def _acf(x: np.ndarray, lag: int, mu: float, var: float) -> float | None:
    a, b = x[: x.size - lag], x[lag:]
    ok = np.isfinite(a) & np.isfinite(b)
    count = int(np.count_nonzero(ok))
    if count == 0:
        return None
    return float(np.sum((a[ok] - mu) * (b[ok] - mu)) / (count * var))


def _moments_nonzero(x: np.ndarray) -> tuple[float, float]:
    f = finite(x)
    mu = float(f.mean())
    var = _pop_var(f, mu)
    if var == 0.0:
        raise ToolError("ZERO_VARIANCE", "window variance is zero")
    return mu, var


def autocorrelation(x: np.ndarray, lag: int) -> dict:
    if lag < 0 or lag >= x.size:
        raise ToolError("BAD_PARAM", f"lag must lie in [0, {x.size - 1}]")
    mu, var = _moments_nonzero(x)
    value = _acf(x, lag, mu, var)
    if value is None:
        raise ToolError("WINDOW_TOO_SHORT", "no finite pair at this lag")
    return {"value": value}


def agg_autocorrelation(x: np.ndarray, maxlag: int, agg: str) -> dict:
    if maxlag < 1:
        raise ToolError("BAD_PARAM", "maxlag must be >= 1")
    if agg not in ("mean", "median", "var"):
        raise ToolError("BAD_PARAM", "agg must be 'mean', 'median' or 'var'")
    if x.size < 2:
        raise ToolError("WINDOW_TOO_SHORT", "needs at least 2 points")
    mu, var = _moments_nonzero(x)
    m = min(maxlag, x.size - 1)
    acfs = [v for v in (_acf(x, lag, mu, var) for lag in range(1, m + 1)) if v is not None]
    if not acfs:
        raise ToolError("WINDOW_TOO_SHORT", "no finite pair at any lag")
    fn = {"mean": np.mean, "median": np.median, "var": np.var}[agg]
    return {"value": float(fn(np.asarray(acfs)))}


def number_peaks(x: np.ndarray, n: int) -> dict:
    if n < 1:
        raise ToolError("BAD_PARAM", "n must be >= 1")
    size = x.size
    if size < 2 * n + 1:
        raise ToolError("WINDOW_TOO_SHORT", f"window needs at least {2 * n + 1} points")
    centre = x[n : size - n]
    is_peak = np.ones(centre.size, dtype=bool)
    with np.errstate(invalid="ignore"):
        for k in range(1, n + 1):
            is_peak &= centre > x[n - k : size - n - k]
            is_peak &= centre > x[n + k : size - n + k]
    return {"value": float(np.count_nonzero(is_peak))}


def extreme_location(x: np.ndarray, which: str, kind: str) -> dict:
    f = finite(x)
    target = f.min() if kind == "min" else f.max()
    hits = np.flatnonzero(x == target)
    if which == "first":
        return {"value": float(hits[0] / x.size)}
    return {"value": float((hits[-1] + 1) / x.size)}


def _longest_run(mask: np.ndarray) -> int:
    best = run = 0
    for flag in mask:
        run = run + 1 if flag else 0
        best = max(best, run)
    return best


def longest_strike(x: np.ndarray, relation: str) -> dict:
    mu = float(finite(x).mean())
    with np.errstate(invalid="ignore"):
        mask = x > mu if relation == "above" else x < mu
    return {"value": float(_longest_run(mask))}


def mean_n_absolute_max(x: np.ndarray, n: int) -> dict:
    f = finite(x)
    if n < 1 or n > f.size:
        raise ToolError("BAD_PARAM", f"n must lie in [1, {f.size}]")
    top = np.sort(np.abs(f))[-n:]
    return {"value": float(np.mean(top))}


def cid_ce(x: np.ndarray, normalize: bool) -> dict:
    require_complete(x)
    if x.size < 2:
        raise ToolError("WINDOW_TOO_SHORT", "cid_ce needs at least 2 points")
    if normalize:
        s = float(np.std(x))
        if s == 0.0:
            return {"value": 0.0}
        x = (x - x.mean()) / s
    d = np.diff(x)
    return {"value": float(np.sqrt(d @ d))}
