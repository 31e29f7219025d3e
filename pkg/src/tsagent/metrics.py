"""Point-forecast metrics over valid positions and the judge accuracy harness.

Omega is the set of (sample, step) pairs whose mask is true and whose target
is finite. Micro averaging pools Omega across samples; macro averages the
per-sample values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from tsagent.agent.prompts import FORECAST_ACCURACY_TEMPLATE, fill, format_values
from tsagent.corpus.qc import JudgeConfig, ask_judge, parse_verdict
from tsagent.errors import MetricError
from tsagent.gateway import ChatClient


@dataclass
class EvalSample:
    sample_id: str
    target: np.ndarray
    prediction: np.ndarray
    mask: np.ndarray | None = None
    history: np.ndarray | None = None

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        self.prediction = np.asarray(self.prediction, dtype=float)
        if self.target.shape != self.prediction.shape or self.target.ndim != 1:
            raise MetricError("SHAPE", f"{self.sample_id}: target and prediction must be equal-length 1-D")
        if self.mask is None:
            self.mask = np.ones(len(self.target), dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.target.shape:
            raise MetricError("SHAPE", f"{self.sample_id}: mask length differs from target")
        if self.history is not None:
            self.history = np.asarray(self.history, dtype=float)

    @property
    def valid(self) -> np.ndarray:
        v = self.mask & np.isfinite(self.target)
        if not np.all(np.isfinite(self.prediction[v])):
            raise MetricError("SHAPE", f"{self.sample_id}: non-finite prediction at a valid position")
        return v

    @property
    def errors(self) -> np.ndarray:
        v = self.valid
        return self.prediction[v] - self.target[v]

    @classmethod
    def from_dict(cls, d: dict) -> "EvalSample":
        def arr(key):
            x = d.get(key)
            return None if x is None else np.array([np.nan if v is None else v for v in x], dtype=float)

        return cls(str(d.get("sample_id", "")), arr("target"), arr("prediction"),
                   None if d.get("mask") is None else np.asarray(d["mask"], dtype=bool), arr("history"))


def _aggregate(samples: Sequence[EvalSample], f, average: str) -> float:
    if average not in ("micro", "macro"):
        raise MetricError("BAD_PARAM", "average must be 'micro' or 'macro'")
    per = [f(s) for s in samples]
    n = sum(len(p) for p in per)
    if n == 0:
        raise MetricError("EMPTY_OMEGA", "no valid forecast positions")
    if average == "micro":
        return math.fsum(math.fsum(p) for p in per) / n
    vals = [math.fsum(p) / len(p) for p in per if len(p)]
    return math.fsum(vals) / len(vals)


def mse(samples: Sequence[EvalSample], average: str = "micro") -> float:
    return _aggregate(samples, lambda s: (s.errors ** 2).tolist(), average)


def mae(samples: Sequence[EvalSample], average: str = "micro") -> float:
    return _aggregate(samples, lambda s: np.abs(s.errors).tolist(), average)


def naive_scale(history, season: int = 1) -> float:
    """In-sample seasonal naive MAE, (1/(L-s)) sum |x_t - x_{t-s}| over finite pairs."""
    if season < 1:
        raise MetricError("BAD_PARAM", "season must be >= 1")
    x = np.asarray(history, dtype=float)
    if len(x) <= season:
        raise MetricError("ZERO_DENOMINATOR", f"history length {len(x)} must exceed season {season}")
    d = x[season:] - x[:-season]
    d = d[np.isfinite(d)]
    if len(d) == 0:
        raise MetricError("ZERO_DENOMINATOR", "no finite lagged pairs in history")
    scale = math.fsum(np.abs(d).tolist()) / len(d)
    if scale == 0:
        raise MetricError("ZERO_DENOMINATOR", f"history is constant at season {season}")
    return scale


def mase(samples: Sequence[EvalSample], season: int = 1, average: str = "micro") -> float:
    """Absolute errors scaled by each sample's own in-sample naive MAE."""

    def scaled(s: EvalSample):
        if s.history is None:
            raise MetricError("BAD_PARAM", f"{s.sample_id}: mase needs history")
        e = np.abs(s.errors)
        return (e / naive_scale(s.history, season)).tolist() if len(e) else []

    return _aggregate(samples, scaled, average)


def read_eval_jsonl(path: str | Path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def evaluate(records: Iterable[dict], season: int = 1, average: str = "micro") -> dict:
    """Report {mse, mae, mase, n_positions}. mase is null when any sample lacks history."""
    samples = [EvalSample.from_dict(r) for r in records]
    n = int(sum(s.valid.sum() for s in samples))
    report = {"mse": mse(samples, average), "mae": mae(samples, average), "mase": None, "n_positions": n}
    if samples and all(s.history is not None for s in samples):
        report["mase"] = mase(samples, season, average)
    return report


@dataclass
class JudgeAccuracy:
    accuracy: float
    n: int
    passed: int
    malformed: int

    def to_dict(self) -> dict:
        return {"judge_accuracy": self.accuracy, "n": self.n, "passed": self.passed, "malformed": self.malformed}


def judge_accuracy(items: Sequence[tuple[str, Sequence[float], Sequence[float]]], client: ChatClient,
                   cfg: JudgeConfig = JudgeConfig()) -> JudgeAccuracy:
    """items: (description, short future, long future). Malformed verdicts are failures."""
    if not items:
        raise MetricError("EMPTY_OMEGA", "no samples to judge")
    passed = malformed = 0
    for text, short, long in items:
        prompt = fill(FORECAST_ACCURACY_TEMPLATE, forecast_text=text, future_short_text=format_values(short),
                      future_long_text=format_values(long))
        ok, _, bad = parse_verdict(ask_judge(client, prompt, cfg))
        passed += ok
        malformed += bad
    return JudgeAccuracy(passed / len(items), len(items), passed, malformed)
