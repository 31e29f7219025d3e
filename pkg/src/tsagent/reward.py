"""Turn-level credit assignment: scores, deltas, returns and group-normalized advantages."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from tsagent.errors import RewardError, ScorerError
from tsagent.scoring import DEFAULT_QUANTILES, score

ADV_STD_FLOOR = 1e-8


def deltas(scores: Sequence[float]) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if s.size < 2:
        raise RewardError("BAD_PARAM", "need at least S^0 and one turn score")
    return np.diff(s)


def compute_returns(d: Sequence[float], gamma: float) -> np.ndarray:
    """R^i = D^i + gamma * R^{i+1}, evaluated backwards."""
    if not 0.0 <= gamma <= 1.0:
        raise RewardError("BAD_PARAM", "gamma must lie in [0, 1]")
    d = np.asarray(d, dtype=float)
    out = np.empty_like(d)
    acc = 0.0
    for i in range(d.size - 1, -1, -1):
        acc = d[i] + gamma * acc
        out[i] = acc
    return out


@dataclass(frozen=True)
class TurnCredit:
    scores: tuple[float, ...]
    gamma: float = 1.0
    deltas: tuple[float, ...] = field(init=False)
    returns: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        d = deltas(self.scores)
        object.__setattr__(self, "deltas", tuple(d.tolist()))
        object.__setattr__(self, "returns", tuple(compute_returns(d, self.gamma).tolist()))

    @property
    def n_turns(self) -> int:
        return len(self.deltas)


def group_normalize(returns: Sequence[Sequence[float]]) -> list[np.ndarray]:
    """(R - mean) / std over the pooled turn returns of the whole group.

    Population std, floored, so an all-equal group maps to zeros.
    """
    if len(returns) < 2:
        raise RewardError("DEGENERATE_GROUP", "group normalization needs G >= 2")
    pooled = np.concatenate([np.asarray(r, dtype=float) for r in returns]) if returns else np.empty(0)
    if pooled.size < 2:
        raise RewardError("DEGENERATE_GROUP", "fewer than 2 pooled returns")
    mu = pooled.mean()
    sigma = max(float(pooled.std()), ADV_STD_FLOOR)
    return [(np.asarray(r, dtype=float) - mu) / sigma for r in returns]


@dataclass
class ScoreResult:
    scores: list[float | None]
    errors: list[dict | None]

    @property
    def valid(self) -> bool:
        return all(s is not None for s in self.scores)


def compute_scores(descriptions: Sequence[str], history, future, scorer,
                   horizons=(96, 720), quantiles=DEFAULT_QUANTILES) -> ScoreResult:
    """S^i = -L_q(X, r^i; Y) for each description. Failures are recorded per turn."""
    scores, errors = [], []
    for text in descriptions:
        try:
            scores.append(score(history, text, future, scorer, horizons, quantiles))
            errors.append(None)
        except ScorerError as exc:
            scores.append(None)
            errors.append(exc.to_dict())
    return ScoreResult(scores, errors)


def attach_token_advantages(trajectory, advantages: Sequence[float]) -> list[dict]:
    """Label each assistant turn's token span with its advantage.

    Offsets index the concatenated assistant-only token stream; tool, user
    and system tokens are never labeled.
    """
    counts = trajectory.stats.get("turn_tokens")
    if counts is None or len(counts) != trajectory.n_turns or any(c is None for c in counts):
        raise RewardError("MISSING_TOKENIZATION", "per-turn completion token counts are absent")
    if len(advantages) != trajectory.n_turns:
        raise RewardError("BAD_PARAM", "one advantage per assistant turn required")
    spans, start = [], 0
    for i, ((lo, _), n, adv) in enumerate(zip(trajectory.turn_boundaries, counts, advantages), start=1):
        spans.append({"turn": i, "message_index": lo, "start": start, "end": start + int(n), "advantage": float(adv)})
        start += int(n)
    return spans


def build_group_records(group_id: str, trajectories, score_results: Sequence[ScoreResult], gamma: float) -> list[dict]:
    """One RL record per trajectory. Invalid trajectories stay in the batch
    with ``valid: false`` and no spans; they do not enter the group statistics."""
    credits = [TurnCredit(tuple(r.scores), gamma) if r.valid else None for r in score_results]
    live = [i for i, c in enumerate(credits) if c is not None]
    degenerate = False
    try:
        normed = group_normalize([credits[i].returns for i in live])
    except RewardError:
        degenerate = True
        normed = [np.zeros(credits[i].n_turns) for i in live]
    adv = dict(zip(live, normed))
    records = []
    for i, (traj, res) in enumerate(zip(trajectories, score_results)):
        c = credits[i]
        rec = {
            "group_id": group_id,
            "sample_id": traj.sample_id,
            "rollout_index": traj.rollout_index,
            "group_size": len(trajectories),
            "messages": traj.messages,
            "gamma": gamma,
            "scores": res.scores,
            "score_errors": res.errors,
            "valid": c is not None,
            "degenerate_group": degenerate,
            "deltas": list(c.deltas) if c else None,
            "returns": list(c.returns) if c else None,
            "advantages": adv[i].tolist() if c else None,
            "spans": attach_token_advantages(traj, adv[i]) if c else [],
            "metadata": {"sample": traj.sample, "n_turns": traj.n_turns},
        }
        records.append(rec)
    return records
