"""Description-conditioned scorers and the full forecasting objective.

A scorer maps (history, description, horizons, quantiles) to a
:class:`QuantileForecast` in the history's instance-normalized space.
"""

from __future__ import annotations

import math
import threading
from typing import Protocol, Sequence

import httpx
import numpy as np

from tsagent.errors import ScorerError
from tsagent.scoring.loss import DEFAULT_QUANTILES, QuantileForecast, TargetBundle, check_quantiles, objective
from tsagent.series import NormStats, normalize


class Scorer(Protocol):
    def forecast(self, history, description: str, horizons: Sequence[int],
                 quantiles: Sequence[float] = DEFAULT_QUANTILES) -> QuantileForecast: ...


class SeasonalNaiveScorer:
    """Repeats the last season of the normalized history. Ignores the text.

    Missing history values are read as the history mean (0 after normalization).
    """

    def __init__(self, season: int = 1):
        if season < 1:
            raise ScorerError("BAD_PARAM", "season must be >= 1")
        self.season = season

    def forecast(self, history, description="", horizons=(96,), quantiles=DEFAULT_QUANTILES):
        x = np.asarray(history, dtype=float)
        s, n = self.season, x.size
        if n < s:
            raise ScorerError("WINDOW_TOO_SHORT", f"history of {n} points is shorter than season {s}")
        z = np.nan_to_num(normalize(x, NormStats.from_history(x)), nan=0.0)
        q = check_quantiles(quantiles)
        heads = []
        for h in horizons:
            idx = n - s + (np.arange(h) % s)
            heads.append(np.repeat(z[idx][:, None], len(q), axis=1))
        return QuantileForecast(tuple(heads), tuple(horizons), q)


class RemoteScorer:
    """POSTs to an HTTP forecaster.

    Request:  {history, description, horizons, quantiles}, missing values as null.
    Response: {heads: [{horizon, values}]} with values (H x |Q|) in original units.
    The response is normalized with the history statistics before scoring.
    """

    def __init__(self, url: str, timeout: float = 30.0, max_concurrency: int = 4,
                 transport: httpx.BaseTransport | None = None):
        self.url = url
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._slots = threading.BoundedSemaphore(max_concurrency)

    def close(self) -> None:
        self._client.close()

    def forecast(self, history, description="", horizons=(96,), quantiles=DEFAULT_QUANTILES):
        x = np.asarray(history, dtype=float)
        q = check_quantiles(quantiles)
        body = {
            "history": [float(v) if math.isfinite(v) else None for v in x],
            "description": description,
            "horizons": [int(h) for h in horizons],
            "quantiles": list(q),
        }
        with self._slots:
            try:
                resp = self._client.post(self.url, json=body)
                resp.raise_for_status()
            except httpx.HTTPError as exc:
                raise ScorerError("TRANSPORT", str(exc)) from exc
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ScorerError("SCHEMA", "response is not JSON") from exc
        heads = _parse_heads(payload, list(horizons), len(q))
        stats = NormStats.from_history(x)
        try:
            return QuantileForecast(tuple(normalize(h, stats) for h in heads), tuple(horizons), q)
        except ScorerError as exc:
            raise ScorerError("SCHEMA", exc.message) from exc


def _parse_heads(payload, horizons: list[int], n_q: int) -> list[np.ndarray]:
    heads = payload.get("heads") if isinstance(payload, dict) else None
    if not isinstance(heads, list) or len(heads) != len(horizons):
        raise ScorerError("SCHEMA", "expected one head per requested horizon")
    out = []
    for h, head in zip(horizons, heads):
        if not isinstance(head, dict) or head.get("horizon") != h:
            raise ScorerError("SCHEMA", f"head for horizon {h} missing or out of order")
        try:
            m = np.array(head["values"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScorerError("SCHEMA", "head values must be a numeric matrix") from exc
        if m.shape != (h, n_q) or not np.all(np.isfinite(m)):
            raise ScorerError("SCHEMA", f"head for horizon {h} has shape {m.shape}, want {(h, n_q)}")
        out.append(m)
    return out


def full_objective(history, description: str, future, scorer: Scorer,
                   horizons: Sequence[int] = (96, 720), quantiles: Sequence[float] = DEFAULT_QUANTILES) -> float:
    """Mean pinball objective of ``scorer`` given ``description``.

    ``future`` holds at least max(horizons) raw values following the history;
    head k is scored on its first H_k entries.
    """
    x = np.asarray(history, dtype=float)
    y = np.asarray(future, dtype=float)
    if y.size < max(horizons):
        raise ScorerError("SHAPE", f"future has {y.size} values, need {max(horizons)}")
    stats = NormStats.from_history(x)
    fc = scorer.forecast(x, description, tuple(horizons), quantiles)
    targets = [TargetBundle.from_values(normalize(y[:h], stats)) for h in horizons]
    return objective(fc, targets)


def score(history, description, future, scorer, horizons=(96, 720), quantiles=DEFAULT_QUANTILES) -> float:
    """S = -L_q."""
    return -full_objective(history, description, future, scorer, horizons, quantiles)
