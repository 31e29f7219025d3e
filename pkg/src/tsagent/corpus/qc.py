"""LLM-judge quality checks: metadata leak, reasoning usage, forecast accuracy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

from tsagent.agent.prompts import (
    FORECAST_ACCURACY_TEMPLATE,
    METADATA_LEAK_TEMPLATE,
    REASONING_USAGE_TEMPLATE,
    fill,
    format_values,
    metadata_context,
)
from tsagent.agent.trajectory import Trajectory
from tsagent.gateway import ChatClient, CompletionRequest
from tsagent.series import Metadata

CHECKS = ("metadata_leak", "reasoning_usage", "forecast_accuracy")
MAX_EVIDENCE_WORDS = 60


@dataclass(frozen=True)
class QCVerdict:
    check: str
    passed: bool
    evidence: str
    attempt: int = 1
    malformed: bool = False
    evidence_too_long: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class JudgeConfig:
    model: str = ""
    temperature: float = 0.0
    max_tokens: int | None = None


def parse_verdict(text: str | None) -> tuple[bool, str, bool]:
    """Strict JSON ``{"pass": bool, "evidence": str}`` -> (pass, evidence, malformed).

    Anything else is a failure with evidence "malformed".
    """
    try:
        obj = json.loads(text or "")
    except ValueError:
        return False, "malformed", True
    if not isinstance(obj, dict) or not isinstance(obj.get("pass"), bool) or not isinstance(obj.get("evidence"), str):
        return False, "malformed", True
    return obj["pass"], obj["evidence"], False


def serialize_conversation(messages: Sequence[dict]) -> str:
    """Everything after the system prompt, one block per message; tool calls
    are rendered as {"call_id", "name", "arguments"} objects."""
    parts = []
    for m in messages:
        role = m["role"]
        if role == "system":
            continue
        if role == "tool":
            parts.append(f"[observation {m.get('tool_call_id')}] {m.get('content')}")
            continue
        if m.get("content"):
            parts.append(f"[{role}] {m['content']}")
        for c in m.get("tool_calls") or []:
            try:
                args = json.loads(c["function"]["arguments"])
            except (ValueError, TypeError):
                args = c["function"]["arguments"]
            parts.append("[tool call] " + json.dumps({"call_id": c["id"], "name": c["function"]["name"], "arguments": args}))
    return "\n".join(parts)


def judge_prompts(traj: Trajectory, metadata: Metadata, future_short, future_long) -> dict[str, str]:
    final = traj.final_text or ""
    ctx = metadata_context(metadata)
    return {
        "metadata_leak": fill(METADATA_LEAK_TEMPLATE, forecast_text=final, metadata_context=ctx),
        "reasoning_usage": fill(REASONING_USAGE_TEMPLATE, metadata_context=ctx,
                                messages_text=serialize_conversation(traj.messages)),
        "forecast_accuracy": fill(FORECAST_ACCURACY_TEMPLATE, forecast_text=final,
                                  future_short_text=format_values(future_short),
                                  future_long_text=format_values(future_long)),
    }


def ask_judge(client: ChatClient, prompt: str, cfg: JudgeConfig) -> str | None:
    req = CompletionRequest(({"role": "user", "content": prompt},), None, cfg.temperature, cfg.max_tokens, cfg.model)
    return client.complete(req).content


def run_qc(traj: Trajectory, judge: ChatClient, metadata: Metadata, future_short, future_long,
           attempt: int = 1, cfg: JudgeConfig = JudgeConfig()) -> list[QCVerdict]:
    """Run the checks in order, stopping at the first failure. Gateway errors propagate."""
    prompts = judge_prompts(traj, metadata, future_short, future_long)
    out = []
    for check in CHECKS:
        passed, evidence, malformed = parse_verdict(ask_judge(judge, prompts[check], cfg))
        too_long = len(evidence.split()) > MAX_EVIDENCE_WORDS
        out.append(QCVerdict(check, passed, evidence, attempt, malformed, too_long))
        if not passed:
            break
    return out


def qc_passed(verdicts: Sequence[QCVerdict]) -> bool:
    return len(verdicts) == len(CHECKS) and all(v.passed for v in verdicts)
