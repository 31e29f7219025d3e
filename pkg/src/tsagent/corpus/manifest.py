"""Manifest loading and per-window sample assembly.

Manifest JSON::

    {"datasets": [{"name": "Grid", "csv": "grid.csv", "metadata": "grid_meta.json",
                   "freq": "H", "series": [{"series_id": "a", "length": 3000}]}]}

Paths are relative to the manifest. ``series`` is optional; without it
lengths are read from the CSV.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from tsagent.agent.prompts import SampleContext
from tsagent.corpus.windowing import WindowSpec
from tsagent.errors import ConfigError
from tsagent.series import Metadata, Series, read_metadata, read_series_csv


@dataclass
class DatasetEntry:
    name: str
    csv: Path
    metadata: Path | None = None
    freq: str | None = None
    series: list[tuple[str, int]] = field(default_factory=list)


def load_manifest(path: str | Path) -> list[DatasetEntry]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError("BAD_MANIFEST", f"{path}: {exc}") from exc
    base = path.parent
    out = []
    for d in doc.get("datasets", []):
        if "name" not in d or "csv" not in d:
            raise ConfigError("BAD_MANIFEST", "each dataset needs name and csv")
        entry = DatasetEntry(d["name"], base / d["csv"], base / d["metadata"] if d.get("metadata") else None, d.get("freq"))
        if "series" in d:
            entry.series = [(str(s["series_id"]), int(s["length"])) for s in d["series"]]
        else:
            entry.series = [(sid, len(s)) for sid, s in load_csv(str(entry.csv)).items()]
        out.append(entry)
    return out


@lru_cache(maxsize=64)
def load_csv(path: str) -> dict[str, Series]:
    return read_series_csv(path)


@lru_cache(maxsize=64)
def load_sidecar(path: str) -> dict[str, Metadata]:
    return read_metadata(path)


def attach_sources(spec: WindowSpec, entry: DatasetEntry, relative_to: Path) -> WindowSpec:
    """Record where the series lives, relative to the directory of the specs file."""
    extra = {"source": os.path.relpath(entry.csv, relative_to), "freq": entry.freq}
    if entry.metadata is not None:
        extra["metadata_source"] = os.path.relpath(entry.metadata, relative_to)
    return WindowSpec(**{**spec.__dict__, "extra": extra})


def spec_record(spec: WindowSpec) -> dict:
    d = spec.to_dict()
    extra = d.pop("extra")
    d.update(extra)
    return d


def spec_from_record(d: dict) -> WindowSpec:
    known = {"series_id", "hist_start", "hist_len", "short_start", "short_len", "long_start", "long_len",
             "kind", "dataset", "masked"}
    extra = {k: v for k, v in d.items() if k not in known and k != "sample_id"}
    return WindowSpec(**{k: d[k] for k in known if k in d}, extra=extra)


@dataclass(frozen=True)
class LoadedSample:
    context: SampleContext
    future_short: np.ndarray
    future_long: np.ndarray


def load_sample(spec: WindowSpec, base: str | Path) -> LoadedSample:
    """History, future segments and metadata for one window."""
    base = Path(base)
    series_map = load_csv(str(base / spec.extra["source"]))
    if spec.series_id not in series_map:
        raise ConfigError("BAD_MANIFEST", f"series {spec.series_id!r} not in {spec.extra['source']}")
    s = series_map[spec.series_id]
    if spec.end > len(s):
        raise ConfigError("BAD_MANIFEST", f"window for {spec.sample_id} exceeds series length {len(s)}")
    md = Metadata()
    if spec.extra.get("metadata_source"):
        md = load_sidecar(str(base / spec.extra["metadata_source"])).get(spec.series_id, Metadata())
    hs, he = spec.hist_start, spec.hist_start + spec.hist_len
    ts = s.timestamps

    def span(a, b):
        return (ts[a], ts[b - 1]) if ts is not None else (None, None)

    ctx = SampleContext(
        sample_id=spec.sample_id,
        history=s.values[hs:he],
        horizons=(spec.short_len, spec.long_len),
        metadata=md,
        masked=spec.masked,
        history_span=span(hs, he),
        short_span=span(spec.short_start, spec.short_start + spec.short_len),
        long_span=span(spec.long_start, spec.long_start + spec.long_len),
    )
    return LoadedSample(
        ctx,
        np.asarray(s.values[spec.short_start: spec.short_start + spec.short_len]),
        np.asarray(s.values[spec.long_start: spec.long_start + spec.long_len]),
    )
