"""Multi-turn tool-calling loop with turn and parallel-call budgets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from tsagent.agent.prompts import SampleContext, render_system_prompt, render_user_prompt
from tsagent.agent.trajectory import Trajectory
from tsagent.errors import RolloutError
from tsagent.gateway import ChatClient, CompletionRequest
from tsagent.series import Series
from tsagent.tools import TOOLBOX, Toolbox


@dataclass(frozen=True)
class RolloutConfig:
    max_assistant_turns: int = 8
    max_parallel_calls: int = 3
    temperature: float = 0.0
    max_tokens: int | None = None
    model: str = ""
    seed: int | None = None
    require_broad_and_local: bool = False  # enforced by QC, not by the loop

    def __post_init__(self):
        if self.max_assistant_turns < 1 or self.max_parallel_calls < 1:
            raise RolloutError("BAD_CONFIG", "turn and call budgets must be >= 1")


def round_observation(obs: dict) -> dict:
    """Four decimals for readable magnitudes, four significant digits below 1e-3."""

    def r(v):
        if isinstance(v, dict):
            return {k: r(x) for k, x in v.items()}
        if isinstance(v, bool) or not isinstance(v, float):
            return v
        if v == 0 or not math.isfinite(v):
            return v
        return round(v, 4) if abs(v) >= 1e-3 else float(f"{v:.4g}")

    return r(obs)


def _request(messages, config: RolloutConfig, tools) -> CompletionRequest:
    return CompletionRequest(
        messages=tuple(messages),
        tools=tuple(tools) if tools else None,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        model=config.model,
        seed=config.seed,
    )


def run_rollout(sample: SampleContext, client: ChatClient, toolbox: Toolbox = TOOLBOX,
                config: RolloutConfig = RolloutConfig(), sample_ref: dict | None = None,
                rollout_index: int = 0) -> Trajectory:
    """Drive the agent until it answers without tool calls.

    The last allowed turn is requested without tool schemas, which forces a
    final answer. Calls beyond the per-turn cap get a BUDGET_EXCEEDED
    observation. Gateway errors propagate.
    """
    messages = [
        {"role": "system", "content": render_system_prompt(config.max_assistant_turns, config.max_parallel_calls)},
        {"role": "user", "content": render_user_prompt(sample)},
    ]
    series = Series(sample.history)
    schemas = toolbox.schemas()
    bounds: list[tuple[int, int]] = []
    stats = {"tool_calls": 0, "executed": 0, "budget_exceeded": 0, "tool_errors": 0, "dropped_calls": 0,
             "turn_tokens": [], "prompt_tokens": 0, "completion_tokens": 0, "forced_final": False}

    for turn in range(1, config.max_assistant_turns + 1):
        last = turn == config.max_assistant_turns
        resp = client.complete(_request(messages, config, None if last else schemas))
        stats["turn_tokens"].append(resp.completion_tokens)
        stats["prompt_tokens"] += resp.usage.get("prompt_tokens", 0)
        stats["completion_tokens"] += resp.usage.get("completion_tokens", 0)
        msg = dict(resp.message)
        calls = resp.tool_calls
        lo = len(messages)

        if last and calls:
            # tools were not offered; keep only the text
            stats["dropped_calls"] += len(calls)
            msg.pop("tool_calls", None)
            calls = []
        if last:
            stats["forced_final"] = True

        if not calls:
            if not (msg.get("content") or "").strip():
                raise RolloutError("EMPTY_FINAL", f"turn {turn} produced neither tool calls nor text")
            messages.append(msg)
            bounds.append((lo, len(messages)))
            break

        messages.append(msg)
        stats["tool_calls"] += len(calls)
        for k, call in enumerate(calls):
            if k < config.max_parallel_calls:
                outcome = toolbox.invoke(series, call["function"]["name"], call["function"]["arguments"])
                obs = round_observation(outcome.observation())
                stats["executed"] += 1
                stats["tool_errors"] += 0 if outcome.ok else 1
            else:
                obs = {"error": {"code": "BUDGET_EXCEEDED",
                                 "message": f"at most {config.max_parallel_calls} tool calls run per reply"}}
                stats["budget_exceeded"] += 1
            messages.append({"role": "tool", "tool_call_id": call["id"], "content": json.dumps(obs)})
        bounds.append((lo, len(messages)))

    traj = Trajectory(
        sample_id=sample.sample_id,
        messages=messages,
        turn_boundaries=bounds,
        descriptions=[],
        stats=stats,
        sample=dict(sample_ref or {}),
        rollout_index=rollout_index,
    )
    traj.descriptions = [traj.final_text]
    return traj


def elicit_turn_descriptions(traj: Trajectory, client: ChatClient,
                             config: RolloutConfig = RolloutConfig()) -> list[str]:
    """r^0 from (system, user); r^i from the prefix through turn i's
    observations; r^N is the final answer. Requests carry no tools."""
    if traj.status != "ok" or traj.final_text is None:
        raise RolloutError("EMPTY_FINAL", "trajectory has no final answer")
    prefixes = [2] + [end for _, end in traj.turn_boundaries[:-1]]
    out = []
    for end in prefixes:
        resp = client.complete(_request(traj.messages[:end], config, None))
        out.append(resp.content or "")
    out.append(traj.final_text)
    return out
