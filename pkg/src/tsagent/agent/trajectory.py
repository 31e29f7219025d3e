"""Trajectory record shared by rollout, QC and reward stages."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator


@dataclass
class Trajectory:
    """One rollout.

    ``turn_boundaries[i]`` is the ``[start, end)`` message range of assistant
    turn i+1 (its assistant message plus tool responses). ``descriptions``
    holds r^0..r^N when elicited, otherwise just the final answer.
    ``stats["turn_tokens"]`` lists completion tokens per assistant turn.
    """

    sample_id: str
    messages: list[dict]
    turn_boundaries: list[tuple[int, int]]
    descriptions: list[str]
    stats: dict = field(default_factory=dict)
    sample: dict = field(default_factory=dict)
    rollout_index: int = 0
    status: str = "ok"
    error: dict | None = None

    @property
    def n_turns(self) -> int:
        return len(self.turn_boundaries)

    @property
    def final_text(self) -> str | None:
        if self.status != "ok" or not self.turn_boundaries:
            return None
        msg = self.messages[self.turn_boundaries[-1][0]]
        return msg.get("content")

    @property
    def elicited(self) -> bool:
        return len(self.descriptions) == self.n_turns + 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["turn_boundaries"] = [list(b) for b in self.turn_boundaries]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        d = dict(d)
        d["turn_boundaries"] = [tuple(b) for b in d.get("turn_boundaries", [])]
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(dumps(self.to_dict()).encode()).hexdigest()


def dumps(obj) -> str:
    """Canonical single-line JSON used for every JSONL artifact."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    n = 0
    with open(path, "w") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path) as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def read_trajectories(path: str | Path) -> list[Trajectory]:
    return [Trajectory.from_dict(d) for d in read_jsonl(path)]
