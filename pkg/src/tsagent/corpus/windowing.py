"""Window generation with a per-dataset sample budget.

Per series of length n (defaults L=2048, H_s=96, H_l=720):
  n < H_s + H_l         -> skipped
  n < L + H_l           -> one window using all available history
  otherwise             -> sliding windows from anchor 0 with stride d

If a dataset yields more than B_max windows, each series keeps
b_i ~ sqrt(s_i) of them (capped at s_i, summing to B_max). If it yields
fewer than B_min, smaller strides are tried in order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

from tsagent.errors import ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WindowBudgetConfig:
    L: int = 2048
    H_s: int = 96
    H_l: int = 720
    d: int = 512
    B_max: int = 5000
    B_min: int = 500
    fallback_strides: tuple[int, ...] = (256, 128, 64)

    def __post_init__(self):
        object.__setattr__(self, "fallback_strides", tuple(int(s) for s in self.fallback_strides))
        if self.L < 1 or self.H_s < 1 or self.H_s > self.H_l:
            raise ConfigError("BAD_CONFIG", "need L >= 1 and 1 <= H_s <= H_l")
        strides = (self.d, *self.fallback_strides)
        if any(s < 1 for s in strides) or any(b >= a for a, b in zip(strides, strides[1:])):
            raise ConfigError("BAD_CONFIG", "strides must be positive and strictly decreasing")
        if not 0 <= self.B_min <= self.B_max or self.B_max < 1:
            raise ConfigError("BAD_CONFIG", "need 0 <= B_min <= B_max and B_max >= 1")


@dataclass(frozen=True)
class WindowSpec:
    series_id: str
    hist_start: int
    hist_len: int
    short_start: int
    short_len: int
    long_start: int
    long_len: int
    kind: str  # "sliding" | "max_length"
    dataset: str = ""
    masked: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def sample_id(self) -> str:
        return f"{self.dataset}/{self.series_id}@{self.hist_start}"

    @property
    def end(self) -> int:
        return self.long_start + self.long_len

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sample_id"] = self.sample_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSpec":
        d = {k: v for k, v in d.items() if k != "sample_id"}
        return cls(**d)


@dataclass
class WindowingResult:
    windows: list[WindowSpec]
    stride: int
    total_before_cap: int
    budgets: list[int] | None = None
    warning: str | None = None


def series_windows(series_id: str, n: int, cfg: WindowBudgetConfig, stride: int, dataset: str = "") -> list[WindowSpec]:
    if n < cfg.H_s + cfg.H_l:
        return []
    if n < cfg.L + cfg.H_l:
        h = n - cfg.H_l
        return [WindowSpec(series_id, 0, h, h, cfg.H_s, h, cfg.H_l, "max_length", dataset)]
    count = (n - cfg.L - cfg.H_l) // stride + 1
    out = []
    for k in range(count):
        a = k * stride
        f = a + cfg.L
        out.append(WindowSpec(series_id, a, cfg.L, f, cfg.H_s, f, cfg.H_l, "sliding", dataset))
    return out


def sqrt_budgets(counts: Sequence[int], total: int) -> list[int]:
    """Integer b_i proportional to sqrt(s_i), b_i <= s_i, summing to ``total``.

    Water-filling for the caps, then largest-remainder rounding (ties go to
    the larger s_i, then the earlier series).
    """
    s = [int(c) for c in counts]
    if total > sum(s):
        raise ConfigError("BAD_CONFIG", "budget exceeds available windows")
    quota = [0.0] * len(s)
    active = [i for i, c in enumerate(s) if c > 0]
    remaining = float(total)
    while active:
        w = sum(math.sqrt(s[i]) for i in active)
        capped = [i for i in active if remaining * math.sqrt(s[i]) / w >= s[i]]
        if not capped:
            for i in active:
                quota[i] = remaining * math.sqrt(s[i]) / w
            break
        for i in capped:
            quota[i] = float(s[i])
            remaining -= s[i]
        active = [i for i in active if i not in capped]
    base = [min(int(math.floor(q)), s[i]) for i, q in enumerate(quota)]
    left = total - sum(base)
    # remainders equal up to rounding noise count as ties
    order = sorted(range(len(s)), key=lambda i: (-round(quota[i] - base[i], 9), -s[i], i))
    for i in order:
        if left == 0:
            break
        if base[i] < s[i]:
            base[i] += 1
            left -= 1
    return base


def subsample(windows: list[WindowSpec], b: int) -> list[WindowSpec]:
    """Evenly spaced picks: index floor(j * s / b) for j < b."""
    s = len(windows)
    return [windows[(j * s) // b] for j in range(b)]


def _generate(series, cfg, stride, dataset):
    return [series_windows(sid, n, cfg, stride, dataset) for sid, n in series]


def generate_windows(series: Sequence[tuple[str, int]], cfg: WindowBudgetConfig = WindowBudgetConfig(),
                     dataset: str = "") -> WindowingResult:
    """Windows for one dataset, given (series_id, length) pairs."""
    if any(n < 0 for _, n in series):
        raise ConfigError("BAD_CONFIG", "series lengths must be >= 0")
    stride = cfg.d
    per = _generate(series, cfg, stride, dataset)
    total = sum(len(w) for w in per)
    warning = None
    if total < cfg.B_min and series:
        for alt in cfg.fallback_strides:
            stride = alt
            per = _generate(series, cfg, stride, dataset)
            total = sum(len(w) for w in per)
            if total >= cfg.B_min:
                break
        if total < cfg.B_min:
            warning = f"dataset {dataset!r}: only {total} windows after all fallback strides (B_min={cfg.B_min})"
            log.warning(warning)
    budgets = None
    if total > cfg.B_max:
        budgets = sqrt_budgets([len(w) for w in per], cfg.B_max)
        per = [subsample(w, b) for w, b in zip(per, budgets)]
    return WindowingResult([w for ws in per for w in ws], stride, total, budgets, warning)
