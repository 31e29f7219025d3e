"""Seeded per-dataset metadata masking."""

from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import replace
from typing import Sequence

from tsagent.corpus.windowing import WindowSpec
from tsagent.errors import ConfigError


def mask_metadata(specs: Sequence[WindowSpec], fraction: float = 0.30, seed: int = 0) -> list[WindowSpec]:
    """Mark floor(fraction * count) windows of each dataset as masked.

    The selection depends only on (seed, dataset, count), so reapplying is a
    no-op and reruns agree.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError("BAD_CONFIG", "mask fraction must lie in [0, 1]")
    by_ds: dict[str, list[int]] = defaultdict(list)
    for i, s in enumerate(specs):
        by_ds[s.dataset].append(i)
    chosen: set[int] = set()
    for ds, idx in by_ds.items():
        k = math.floor(fraction * len(idx))
        rng = random.Random(f"{seed}:{ds}")
        chosen.update(idx[j] for j in rng.sample(range(len(idx)), k))
    return [replace(s, masked=i in chosen) for i, s in enumerate(specs)]
