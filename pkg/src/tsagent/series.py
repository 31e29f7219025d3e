"""Series container, window addressing, instance normalization and ingestion."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from tsagent.errors import SeriesError

SCALE_FLOOR = 1e-8

METADATA_FIELDS = (
    "dataset",
    "domain",
    "freq",
    "dataset_description",
    "var_name",
    "var_desc",
    "unit",
)
UNAVAILABLE = "unavailable"


def _frozen_array(values: Iterable[float]) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Series:
    """Immutable numeric history. Non-finite values mark missing observations."""

    values: np.ndarray
    timestamps: tuple[datetime, ...] | None = None
    frequency_label: str | None = None

    def __post_init__(self):
        vals = self.values
        if not (isinstance(vals, np.ndarray) and not vals.flags.writeable and vals.dtype == float):
            vals = _frozen_array(vals)
            object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 1:
            raise SeriesError("BAD_SERIES", "series needs at least one value")
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != vals.size:
                raise SeriesError("BAD_SERIES", "timestamps and values differ in length")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise SeriesError("BAD_SERIES", "timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return int(self.values.size)

    def segment(self, start: int, stop: int) -> "Series":
        """Sub-series ``[start, stop)`` keeping timestamps aligned."""
        Window(start, stop).check(len(self))
        ts = self.timestamps[start:stop] if self.timestamps is not None else None
        return Series(self.values[start:stop], ts, self.frequency_label)


@dataclass(frozen=True)
class Window:
    left: int
    right: int

    @property
    def length(self) -> int:
        return self.right - self.left

    def check(self, n: int) -> None:
        if self.left < 0 or self.right > n or self.left >= self.right:
            raise SeriesError(
                "OUT_OF_BOUNDS",
                f"window [{self.left}, {self.right}) invalid for series of length {n}",
            )


@dataclass(frozen=True)
class WindowStats:
    n: int
    mean: float
    variance: float
    min: float
    max: float


@dataclass(frozen=True)
class NormStats:
    loc: float
    scale: float

    def __post_init__(self):
        if not self.scale >= SCALE_FLOOR:
            raise SeriesError("BAD_PARAM", f"scale must be >= {SCALE_FLOOR}")

    @classmethod
    def from_history(cls, values: Sequence[float] | np.ndarray) -> "NormStats":
        """Mean and population std over the finite history values, std floored."""
        x = np.asarray(values, dtype=float)
        x = x[np.isfinite(x)]
        if x.size == 0:
            raise SeriesError("ALL_MISSING", "history has no finite values")
        loc = float(x.mean())
        scale = float(np.sqrt(np.mean((x - loc) ** 2)))
        return cls(loc, max(scale, SCALE_FLOOR))


def slice_window(series: Series, window: Window) -> np.ndarray:
    window.check(len(series))
    return series.values[window.left : window.right]


def finite_stats(series: Series, window: Window) -> WindowStats:
    x = slice_window(series, window)
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise SeriesError("ALL_MISSING", "no finite value in window")
    mu = float(x.mean())
    return WindowStats(
        n=int(x.size),
        mean=mu,
        variance=float(np.mean((x - mu) ** 2)),
        min=float(x.min()),
        max=float(x.max()),
    )


def normalize(values, stats: NormStats) -> np.ndarray:
    return (np.asarray(values, dtype=float) - stats.loc) / stats.scale


def denormalize(values, stats: NormStats) -> np.ndarray:
    return np.asarray(values, dtype=float) * stats.scale + stats.loc


def parse_timestamp(text: str) -> datetime:
    return datetime.fromisoformat(text.strip())


def read_series_csv(path: str | Path, frequency_label: str | None = None) -> dict[str, Series]:
    """Read ``series_id,timestamp,value`` rows. Empty value cells become NaN.

    Rows are grouped by ``series_id`` in file order; a column of empty
    timestamps yields a series without timestamps.
    """
    grouped: dict[str, tuple[list, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"series_id", "timestamp", "value"} - set(reader.fieldnames or ())
        if missing:
            raise SeriesError("BAD_CSV", f"missing columns: {sorted(missing)}")
        for row in reader:
            ts_list, vals = grouped.setdefault(row["series_id"], ([], []))
            cell = (row["value"] or "").strip()
            vals.append(float(cell) if cell else math.nan)
            ts_list.append((row["timestamp"] or "").strip())
    out = {}
    for sid, (ts_list, vals) in grouped.items():
        timestamps = None
        if all(ts_list):
            timestamps = tuple(parse_timestamp(t) for t in ts_list)
        out[sid] = Series(vals, timestamps, frequency_label)
    return out


def write_series_csv(path: str | Path, series: dict[str, Series]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series_id", "timestamp", "value"])
        for sid, s in series.items():
            for i, v in enumerate(s.values):
                ts = s.timestamps[i].isoformat(sep=" ") if s.timestamps is not None else ""
                writer.writerow([sid, ts, repr(float(v)) if np.isfinite(v) else ""])


@dataclass(frozen=True)
class Metadata:
    """Sidecar context for one series; any field may be ``"unavailable"``."""

    dataset: str = UNAVAILABLE
    domain: str = UNAVAILABLE
    freq: str = UNAVAILABLE
    dataset_description: str = UNAVAILABLE
    var_name: str = UNAVAILABLE
    var_desc: str = UNAVAILABLE
    unit: str = UNAVAILABLE
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, d: dict) -> "Metadata":
        known = {k: str(d[k]) for k in METADATA_FIELDS if d.get(k) is not None}
        extra = {k: v for k, v in d.items() if k not in METADATA_FIELDS}
        return cls(**known, extra=extra)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in METADATA_FIELDS}

    def masked(self) -> "Metadata":
        return Metadata()

    @property
    def is_unavailable(self) -> bool:
        return all(getattr(self, k) == UNAVAILABLE for k in METADATA_FIELDS)


def read_metadata(path: str | Path) -> dict[str, Metadata]:
    """Sidecar as either a JSON object keyed by series_id or JSONL with a
    ``series_id`` field per line."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = None
    if isinstance(obj, dict):
        if "series_id" in obj:
            return {obj["series_id"]: Metadata.from_dict(obj)}
        return {sid: Metadata.from_dict(m) for sid, m in obj.items()}
    out = {}
    for line in text.splitlines():
        if line.strip():
            obj = json.loads(line)
            out[obj["series_id"]] = Metadata.from_dict(obj)
    return out
