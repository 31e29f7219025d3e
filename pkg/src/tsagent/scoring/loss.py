"""Quantile (pinball) objective with log-decay temporal weights."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from tsagent.errors import ScorerError

DEFAULT_QUANTILES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def check_quantiles(quantiles: Sequence[float]) -> tuple[float, ...]:
    q = tuple(float(v) for v in quantiles)
    if not q:
        raise ScorerError("BAD_PARAM", "quantile levels must be non-empty")
    if any(not 0.0 < v < 1.0 for v in q):
        raise ScorerError("BAD_PARAM", "quantile levels must lie in (0, 1)")
    if any(b <= a for a, b in zip(q, q[1:])):
        raise ScorerError("BAD_PARAM", "quantile levels must be strictly increasing")
    return q


def pinball(y: float, yhat: float, q: float) -> float:
    if not 0.0 < q < 1.0:
        raise ScorerError("BAD_PARAM", "q must lie in (0, 1)")
    ind = 1.0 if y <= yhat else 0.0
    return 2.0 * abs((y - yhat) * (ind - q))


def pinball_array(y, yhat, q) -> np.ndarray:
    """Broadcasting version of :func:`pinball`."""
    y, yhat, q = np.asarray(y, float), np.asarray(yhat, float), np.asarray(q, float)
    return 2.0 * np.abs((y - yhat) * ((y <= yhat).astype(float) - q))


def log_decay_weights(horizon: int) -> np.ndarray:
    """w_t = (ln H - ln t) / H for t = 1..H. The last step gets zero weight."""
    if horizon < 1:
        raise ScorerError("BAD_PARAM", "horizon must be >= 1")
    t = np.arange(1, horizon + 1, dtype=float)
    return (math.log(horizon) - np.log(t)) / horizon


@dataclass(frozen=True)
class QuantileForecast:
    """Normalized quantile predictions, one ``H_k x |Q|`` matrix per head.

    Rows are sorted on construction so quantiles never cross.
    """

    heads: tuple[np.ndarray, ...]
    horizons: tuple[int, ...]
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES

    def __post_init__(self):
        q = check_quantiles(self.quantiles)
        if len(self.heads) != len(self.horizons):
            raise ScorerError("SHAPE", "one matrix per horizon required")
        fixed = []
        for h, mat in zip(self.horizons, self.heads):
            m = np.array(mat, dtype=float)
            if m.shape != (h, len(q)):
                raise ScorerError("SHAPE", f"head for horizon {h} has shape {m.shape}, want {(h, len(q))}")
            if not np.all(np.isfinite(m)):
                raise ScorerError("SHAPE", "forecast values must be finite")
            m = np.sort(m, axis=1)
            m.setflags(write=False)
            fixed.append(m)
        object.__setattr__(self, "heads", tuple(fixed))
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        object.__setattr__(self, "quantiles", q)


@dataclass(frozen=True)
class TargetBundle:
    """Normalized future values; ``mask`` marks finite (valid) positions."""

    values: np.ndarray
    mask: np.ndarray

    @classmethod
    def from_values(cls, values) -> "TargetBundle":
        v = np.asarray(values, dtype=float)
        return cls(v, np.isfinite(v))


def horizon_loss(pred, target, mask, quantiles: Sequence[float]) -> float:
    """L_k for one head.

    ``pred`` has shape (B, H, |Q|) or (H, |Q|); ``target`` and ``mask`` have
    shape (B, H) or (H,). Masked positions contribute zero; the result is the
    batch mean of the weighted per-sample sums.
    """
    q = np.asarray(check_quantiles(quantiles))
    p = np.asarray(pred, dtype=float)
    y = np.asarray(target, dtype=float)
    m = np.asarray(mask, dtype=bool)
    if p.ndim == 2:
        p, y, m = p[None], y[None], m[None]
    if p.ndim != 3 or p.shape[2] != q.size or y.shape != p.shape[:2] or m.shape != y.shape:
        raise ScorerError("SHAPE", f"pred {p.shape}, target {y.shape}, mask {m.shape} inconsistent")
    if p.shape[0] == 0:
        raise ScorerError("SHAPE", "empty batch")
    w = log_decay_weights(p.shape[1])
    y_safe = np.where(m, y, 0.0)
    per_step = pinball_array(y_safe[..., None], p, q).mean(axis=2)
    per_step = np.where(m, per_step, 0.0)
    return float(np.mean(per_step @ w))


def objective(forecast: QuantileForecast, targets: Sequence[TargetBundle]) -> float:
    """Average of the per-head losses over all heads."""
    if len(targets) != len(forecast.heads):
        raise ScorerError("SHAPE", "one target bundle per head required")
    losses = [horizon_loss(h, t.values, t.mask, forecast.quantiles) for h, t in zip(forecast.heads, targets)]
    return float(np.mean(losses))
