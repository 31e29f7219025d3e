"""Prompt templates for the forecasting agent and the QC judges.

Templates use ``{name}`` placeholders and are filled in a single pass, so
substituted text is never re-expanded.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

from tsagent.series import METADATA_FIELDS, UNAVAILABLE, Metadata

SYSTEM_TEMPLATE = (
    "You are an expert time-series forecasting analyst with strong domain knowledge. "
    "When metadata is available, use it cautiously. When metadata is unavailable, operate as a "
    "domain-agnostic morphology forecaster.\n"
    "\n"
    "You have access to external tools for local window analysis. Use tools first to inspect shape "
    "details, then produce one final paragraph.\n"
    "\n"
    "Tool-usage policy: Prefer evidence from tools over unaided guessing. For every tool call, always "
    "include left and right (right is exclusive). Before forecasting, inspect at least one broad window "
    "that covers most or all of the history. Also inspect at least one targeted local window near the end "
    "of the history, because the short-term forecast should be grounded in the most recent regime. If "
    "needed, inspect additional windows around suspected turning points, repeating segments, or regime "
    "boundaries. Use additional tool calls only when they materially reduce uncertainty. After enough "
    "evidence is collected, stop calling tools and write the final answer. Do not mention tools, tool "
    "names, or tool outputs in the final answer.\n"
    "\n"
    "Metadata rules: Some samples may contain missing or intentionally masked metadata. The token "
    "unavailable means the information is absent and carries zero semantic weight. Treat unavailable as "
    "missing information, not as a weak hint. Do not infer domain, units, variable identity, calendar "
    "semantics, or real-world causes from fields marked as unavailable. If frequency or timestamps are "
    "unavailable, reason only in relative positions such as early, middle, late, recent, and broader "
    "history. If metadata is unavailable, rely only on the numeric history and tool evidence. Do not "
    "mention missing or unavailable metadata in the final answer.\n"
    "\n"
    "Interpretation principles: Use history only; do not assume unsupported external events. When "
    "reliable metadata is available, use domain knowledge only to interpret plausible persistence, "
    "recurrence, seasonality, or regime evolution that is consistent with the observed history. When "
    "metadata is unavailable or masked, do not guess hidden semantics; rely on morphology and tool "
    "evidence only. Base claims on visible evidence such as trend, periodicity, cycle shape, regimes, "
    "events, extreme placement, transition sharpness, intermittency, roughness, volatility, and amplitude "
    "change. If evidence is weak or conflicting, hedge explicitly instead of overclaiming.\n"
    "\n"
    "Output requirements: Final answer must contain exactly two paragraphs. The first paragraph must "
    "begin with \"In the short term,\" The second paragraph must begin with \"In the long term,\" Each "
    "paragraph should describe predicted morphology only. Do not output chain-of-thought, hidden "
    "reasoning, or process narration. Avoid exact numbers, timestamps, dataset names, units, domain "
    "knowledge and causal stories. Be specific but conservative. Use 3–5 sentences per paragraph. "
    "Keep the full answer under 300 words.\n"
    "\n"
    "Use tools when needed before writing the final answer. You can output at most "
    "{max_assistant_turns} assistant replies in total, and in each reply at most {max_parallel_calls} "
    "tool calls will be executed."
)

_WINDOWS_BLOCK = (
    "History window:\n"
    "  - start_time: {ht0}\n"
    "  - end_time: {ht1}\n"
    "  - length: {history_length}\n"
    "\n"
    "Future window (short term):\n"
    "  - start_time: {ft0_s}\n"
    "  - end_time: {ft1_s}\n"
    "  - horizon: {horizon_short}\n"
    "\n"
    "Future window (long term):\n"
    "  - start_time: {ft0_l}\n"
    "  - end_time: {ft1_l}\n"
    "  - horizon: {horizon_long}\n"
    "\n"
    "History values (comma-separated, earliest to latest):\n"
    "{history_values_text}"
)

USER_TEMPLATE = (
    "Dataset: {dataset}\n"
    "Domain: {domain}\n"
    "Frequency: {freq}\n"
    "Dataset description: {dataset_description}\n"
    "\n"
    "Variable name: {var_name}\n"
    "Variable description: {var_desc}\n"
    "Unit: {unit}\n"
    "Avoid exact numbers, timestamps, dataset names, units, domain knowledge and causal stories in final "
    "morphology output, only use them in your reasoning.\n"
    "\n" + _WINDOWS_BLOCK
)

USER_MASKED_TEMPLATE = (
    "Metadata availability: unavailable\n"
    "\n"
    "Avoid exact numbers, timestamps in final morphology output.\n"
    "\n" + _WINDOWS_BLOCK.replace("{ht0}", UNAVAILABLE).replace("{ht1}", UNAVAILABLE)
    .replace("{ft0_s}", UNAVAILABLE).replace("{ft1_s}", UNAVAILABLE)
    .replace("{ft0_l}", UNAVAILABLE).replace("{ft1_l}", UNAVAILABLE)
)

_VERDICT_FORMAT = 'Return JSON only:\n\n{"pass": true/false, "evidence": "<=60 words"}\n\n'

METADATA_LEAK_TEMPLATE = (
    "You are a strict judge for time-series morphology forecasts.\n"
    "\n"
    "Determine whether the forecast text contains forbidden metadata-like content. Forbidden content "
    "includes exact numbers, timestamps, dataset names, variable names, units, domain labels.\n"
    "\n" + _VERDICT_FORMAT +
    "Forecast text: {forecast_text}\n"
    "Reference metadata / context: {metadata_context}"
)

REASONING_USAGE_TEMPLATE = (
    "You are a strict judge for tool-using time-series reasoning.\n"
    "\n"
    "Determine whether the model's reasoning meaningfully uses the provided metadata context and tool "
    "outputs, instead of ignoring them and producing a generic answer. If metadata is unavailable, judge "
    "whether the reasoning meaningfully uses the numeric history and tool outputs.\n"
    "\n" + _VERDICT_FORMAT +
    "Metadata context: {metadata_context}\n"
    "Serialized conversation: {messages_text}"
)

FORECAST_ACCURACY_TEMPLATE = (
    "You are a strict judge for time-series morphology forecast accuracy.\n"
    "\n"
    "Determine whether the forecast text is broadly consistent with the actual future morphology shown in "
    "the short-term and long-term future values. Focus on morphology only: trend, periodicity, roughness, "
    "volatility, regime change, turning points, and overall structure.\n"
    "\n" + _VERDICT_FORMAT +
    "Forecast text: {forecast_text}\n"
    "Short-term future values: {future_short_text}\n"
    "Long-term future values: {future_long_text}"
)

_PLACEHOLDER = re.compile(r"\{([a-z][a-z0-9_]*)\}")


def fill(template: str, **values) -> str:
    """Single-pass substitution; unknown placeholders are an error."""

    def sub(m):
        key = m.group(1)
        if key not in values:
            raise KeyError(f"no value for placeholder {key!r}")
        return str(values[key])

    return _PLACEHOLDER.sub(sub, template)


def format_value(v: float) -> str:
    """Four significant digits, plain notation for large magnitudes, NaN for missing."""
    if not math.isfinite(v):
        return "NaN"
    if v == 0:
        return "0"
    s = f"{v:#.4g}"
    if "e" in s:
        s = f"{v:.0f}" if abs(v) >= 1 else f"{v:.4e}"
    return s


def format_values(values: Sequence[float]) -> str:
    return ", ".join(format_value(float(v)) for v in values)


def format_timestamp(t: datetime | None) -> str:
    return t.isoformat(sep=" ") if t is not None else UNAVAILABLE


@dataclass(frozen=True)
class SampleContext:
    """What the agent sees for one window: history, horizons and metadata."""

    sample_id: str
    history: np.ndarray
    horizons: tuple[int, int] = (96, 720)
    metadata: Metadata = Metadata()
    masked: bool = False
    history_span: tuple[datetime | None, datetime | None] = (None, None)
    short_span: tuple[datetime | None, datetime | None] = (None, None)
    long_span: tuple[datetime | None, datetime | None] = (None, None)

    def __post_init__(self):
        h = np.asarray(self.history, dtype=float)
        if h.ndim != 1 or h.size < 1:
            raise ValueError("history needs at least one value")
        if min(self.horizons) < 1:
            raise ValueError("horizons must be >= 1")
        h.setflags(write=False)
        object.__setattr__(self, "history", h)

    @property
    def effective_metadata(self) -> Metadata:
        return self.metadata.masked() if self.masked else self.metadata


def render_system_prompt(max_assistant_turns: int = 8, max_parallel_calls: int = 3) -> str:
    return fill(SYSTEM_TEMPLATE, max_assistant_turns=max_assistant_turns, max_parallel_calls=max_parallel_calls)


def render_user_prompt(sample: SampleContext) -> str:
    common = dict(
        history_length=sample.history.size,
        horizon_short=sample.horizons[0],
        horizon_long=sample.horizons[1],
        history_values_text=format_values(sample.history),
    )
    if sample.masked:
        return fill(USER_MASKED_TEMPLATE, **common)
    md = sample.metadata
    return fill(
        USER_TEMPLATE,
        **{k: getattr(md, k) for k in METADATA_FIELDS},
        ht0=format_timestamp(sample.history_span[0]),
        ht1=format_timestamp(sample.history_span[1]),
        ft0_s=format_timestamp(sample.short_span[0]),
        ft1_s=format_timestamp(sample.short_span[1]),
        ft0_l=format_timestamp(sample.long_span[0]),
        ft1_l=format_timestamp(sample.long_span[1]),
        **common,
    )


def metadata_context(md: Metadata) -> str:
    if md.is_unavailable:
        return UNAVAILABLE
    return "; ".join(f"{k}: {getattr(md, k)}" for k in METADATA_FIELDS)
