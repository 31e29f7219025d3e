"""TOML run configuration with strict key checking.

Every section and key is optional; omitted values take the defaults below.
Unknown sections or keys are rejected. Secrets never live in the file: each
endpoint names the environment variable that holds its API key.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import tomli

from tsagent.agent.rollout import RolloutConfig
from tsagent.corpus.qc import JudgeConfig
from tsagent.corpus.windowing import WindowBudgetConfig
from tsagent.errors import ConfigError, RolloutError, ScorerError
from tsagent.gateway import ENV_KEY, ENV_URL, HttpChatClient
from tsagent.scoring.loss import DEFAULT_QUANTILES, check_quantiles


@dataclass
class EndpointSection:
    url: str = ""
    model: str = ""
    api_key_env: str = ENV_KEY
    timeout: float = 120.0
    max_attempts: int = 3
    temperature: float = 0.0
    max_tokens: int | None = None

    def client(self) -> HttpChatClient:
        """File URL first, then TSAGENT_LLM_URL; the key always comes from the environment."""
        url = self.url or os.environ.get(ENV_URL, "")
        if not url:
            raise ConfigError("BAD_CONFIG", f"no endpoint url in config or ${ENV_URL}")
        return HttpChatClient(url, os.environ.get(self.api_key_env), self.timeout, self.max_attempts)


@dataclass
class RolloutSection:
    max_assistant_turns: int = 8
    max_parallel_calls: int = 3
    seed: int | None = None
    group_size: int = 8
    elicit: bool = True


@dataclass
class WindowingSection:
    L: int = 2048
    H_s: int = 96
    H_l: int = 720
    d: int = 512
    B_max: int = 5000
    B_min: int = 500
    fallback_strides: list = field(default_factory=lambda: [256, 128, 64])
    mask_fraction: float = 0.30
    mask_seed: int = 0


@dataclass
class RewardSection:
    gamma: float = 1.0
    quantiles: list = field(default_factory=lambda: list(DEFAULT_QUANTILES))
    naive_season: int = 1
    scorer_timeout: float = 30.0


@dataclass
class EvalSection:
    season: int = 1
    average: str = "micro"


@dataclass
class Config:
    llm: EndpointSection = field(default_factory=EndpointSection)
    judge: EndpointSection = field(default_factory=EndpointSection)
    rollout: RolloutSection = field(default_factory=RolloutSection)
    windowing: WindowingSection = field(default_factory=WindowingSection)
    reward: RewardSection = field(default_factory=RewardSection)
    eval: EvalSection = field(default_factory=EvalSection)
    workers: int = 4

    def __post_init__(self):
        self.window_budget()
        try:
            self.rollout_config()
            check_quantiles(self.reward.quantiles)
        except (RolloutError, ScorerError) as exc:
            raise ConfigError("BAD_CONFIG", exc.message) from exc
        if not 0.0 <= self.windowing.mask_fraction <= 1.0:
            raise ConfigError("BAD_CONFIG", "windowing.mask_fraction must lie in [0, 1]")
        if not 0.0 < self.reward.gamma <= 1.0:
            raise ConfigError("BAD_CONFIG", "reward.gamma must lie in (0, 1]")
        if self.rollout.group_size < 1 or self.workers < 1 or self.eval.season < 1 or self.reward.naive_season < 1:
            raise ConfigError("BAD_CONFIG", "group_size, workers and seasons must be >= 1")
        if self.eval.average not in ("micro", "macro"):
            raise ConfigError("BAD_CONFIG", "eval.average must be 'micro' or 'macro'")

    def window_budget(self) -> WindowBudgetConfig:
        w = self.windowing
        return WindowBudgetConfig(w.L, w.H_s, w.H_l, w.d, w.B_max, w.B_min, tuple(w.fallback_strides))

    def rollout_config(self, seed_offset: int = 0) -> RolloutConfig:
        r, e = self.rollout, self.llm
        seed = None if r.seed is None else r.seed + seed_offset
        return RolloutConfig(r.max_assistant_turns, r.max_parallel_calls, e.temperature, e.max_tokens, e.model, seed)

    def judge_config(self) -> JudgeConfig:
        return JudgeConfig(self.judge.model, self.judge.temperature, self.judge.max_tokens)


def _coerce(section: str, key: str, value, default):
    if default is None:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        raise ConfigError("BAD_CONFIG", f"{section}.{key}: unexpected type {type(value).__name__}")
    return value


def _build(cls, section: str, doc: dict):
    if not isinstance(doc, dict):
        raise ConfigError("BAD_CONFIG", f"[{section}] must be a table")
    proto = cls()
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError("BAD_CONFIG", f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    return cls(**{k: _coerce(section, k, v, getattr(proto, k)) for k, v in doc.items()})


_SECTIONS = {"llm": EndpointSection, "judge": EndpointSection, "rollout": RolloutSection,
             "windowing": WindowingSection, "reward": RewardSection, "eval": EvalSection}


def config_from_dict(doc: dict) -> Config:
    unknown = sorted(set(doc) - set(_SECTIONS) - {"workers"})
    if unknown:
        raise ConfigError("BAD_CONFIG", f"unknown section(s): {', '.join(unknown)}")
    kw = {name: _build(cls, name, doc[name]) for name, cls in _SECTIONS.items() if name in doc}
    if "workers" in doc:
        kw["workers"] = _coerce("", "workers", doc["workers"], 4)
    return Config(**kw)


def load_config(path: str | Path | None = None) -> Config:
    if path is None:
        return Config()
    try:
        doc = tomli.loads(Path(path).read_text())
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError("BAD_CONFIG", f"{path}: {exc}") from exc
    return config_from_dict(doc)
