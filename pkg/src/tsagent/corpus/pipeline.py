"""Rollout -> QC -> retry loop over a list of windows."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from tsagent.agent.rollout import RolloutConfig, run_rollout
from tsagent.agent.trajectory import Trajectory
from tsagent.corpus.manifest import LoadedSample, spec_record
from tsagent.corpus.qc import JudgeConfig, qc_passed, run_qc
from tsagent.corpus.windowing import WindowSpec
from tsagent.errors import GatewayError, RolloutError
from tsagent.gateway import ChatClient
from tsagent.tools import TOOLBOX, Toolbox

log = logging.getLogger(__name__)

MAX_RETRIES = 3


@dataclass
class SampleOutcome:
    sample_id: str
    dataset: str
    accepted: Trajectory | None
    attempts: list[dict] = field(default_factory=list)

    @property
    def retries(self) -> int:
        return len(self.attempts) - 1

    def record(self) -> dict:
        return {"sample_id": self.sample_id, "dataset": self.dataset, "accepted": self.accepted is not None,
                "retries": self.retries, "attempts": self.attempts}


@dataclass
class PipelineResult:
    outcomes: list[SampleOutcome]
    interrupted: bool = False

    @property
    def corpus(self) -> list[Trajectory]:
        return [o.accepted for o in self.outcomes if o.accepted is not None]

    def report(self) -> dict:
        per: dict[str, Counter] = defaultdict(Counter)
        for o in self.outcomes:
            c = per[o.dataset]
            c["windows"] += 1
            c["generated"] += len(o.attempts)
            c["retried"] += o.retries
            c["accepted" if o.accepted is not None else "discarded"] += 1
        keys = ("windows", "generated", "retried", "accepted", "discarded")
        datasets = {ds: {k: per[ds][k] for k in keys} for ds in sorted(per)}
        totals = {k: sum(d[k] for d in datasets.values()) for k in keys}
        return {"datasets": datasets, "totals": totals, "interrupted": self.interrupted}


def process_sample(spec: WindowSpec, sample: LoadedSample, agent: ChatClient, judge: ChatClient,
                   config: RolloutConfig = RolloutConfig(), judge_cfg: JudgeConfig = JudgeConfig(),
                   toolbox: Toolbox = TOOLBOX, max_retries: int = MAX_RETRIES) -> SampleOutcome:
    """Regenerate the rollout from scratch until all checks pass or retries run out."""
    out = SampleOutcome(spec.sample_id, spec.dataset, None)
    md = sample.context.effective_metadata
    for attempt in range(1, max_retries + 2):
        cfg = config if config.seed is None else replace(config, seed=config.seed + attempt - 1)
        try:
            traj = run_rollout(sample.context, agent, toolbox, cfg, spec_record(spec))
            verdicts = run_qc(traj, judge, md, sample.future_short, sample.future_long, attempt, judge_cfg)
        except (GatewayError, RolloutError) as exc:
            out.attempts.append({"attempt": attempt, "error": exc.to_dict(), "verdicts": []})
            continue
        out.attempts.append({"attempt": attempt, "error": None, "verdicts": [v.to_dict() for v in verdicts]})
        if qc_passed(verdicts):
            out.accepted = traj
            break
    return out


def pipeline_run(specs: Sequence[WindowSpec], load: Callable[[WindowSpec], LoadedSample], agent: ChatClient,
                 judge: ChatClient, config: RolloutConfig = RolloutConfig(), judge_cfg: JudgeConfig = JudgeConfig(),
                 max_retries: int = MAX_RETRIES) -> PipelineResult:
    """Samples run sequentially so cassette replays stay aligned. Ctrl-C stops
    after the current sample and returns what finished."""
    result = PipelineResult([])
    try:
        for spec in specs:
            result.outcomes.append(process_sample(spec, load(spec), agent, judge, config, judge_cfg,
                                                  max_retries=max_retries))
    except KeyboardInterrupt:
        log.warning("interrupted after %d of %d samples", len(result.outcomes), len(specs))
        result.interrupted = True
    return result
