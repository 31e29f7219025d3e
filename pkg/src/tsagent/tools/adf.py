"""Augmented Dickey-Fuller t-statistic with AIC lag selection (constant only)."""

from __future__ import annotations

import math

import numpy as np

from tsagent.errors import ToolError
from tsagent.tools.kernels import require_complete

MIN_POINTS = 20


def max_lag(n: int) -> int:
    return min(int(math.floor(12.0 * (n / 100.0) ** 0.25)), n // 2 - 2)


def _design(x: np.ndarray, dx: np.ndarray, lags: int, start: int) -> tuple[np.ndarray, np.ndarray]:
    """Regress dx[t] on [x[t], dx[t-1..t-lags], 1] for t >= start."""
    n1 = dx.size
    cols = [x[start:n1]]
    cols += [dx[start - j : n1 - j] for j in range(1, lags + 1)]
    cols.append(np.ones(n1 - start))
    return np.column_stack(cols), dx[start:]


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    q, r = np.linalg.qr(X)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise ToolError("SINGULAR", "regression matrix is rank-deficient")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    if ssr == 0.0:
        raise ToolError("SINGULAR", "regression fits exactly")
    rinv = np.linalg.inv(r)
    return beta, ssr, rinv @ rinv.T


def _aic(nobs: int, ssr: float, k: int) -> float:
    llf = -nobs / 2.0 * (math.log(2.0 * math.pi) + math.log(ssr / nobs) + 1.0)
    return -2.0 * llf + 2.0 * k


def select_lag(x: np.ndarray) -> int:
    dx = np.diff(x)
    top = max_lag(x.size)
    best = None
    for p in range(top + 1):
        # all candidates share the sample implied by the largest lag
        X, y = _design(x, dx, p, top)
        try:
            _, ssr, _ = _ols(X, y)
        except ToolError:
            continue  # degenerate candidate, not eligible
        score = (_aic(y.size, ssr, X.shape[1]), p)
        if best is None or score < best:
            best = score
    if best is None:
        raise ToolError("SINGULAR", "no lag order gives a full-rank regression")
    return best[1]


def adf_statistic(x: np.ndarray) -> tuple[float, int]:
    p = select_lag(x)
    X, y = _design(x, np.diff(x), p, p)
    beta, ssr, cov = _ols(X, y)
    sigma2 = ssr / (y.size - X.shape[1])
    return float(beta[0] / math.sqrt(sigma2 * cov[0, 0])), p


def augmented_dickey_fuller(x: np.ndarray) -> dict:
    require_complete(x)
    if x.size < MIN_POINTS:
        raise ToolError("WINDOW_TOO_SHORT", f"needs at least {MIN_POINTS} points")
    stat, _ = adf_statistic(x)
    return {"value": stat}
