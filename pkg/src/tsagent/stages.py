"""File-to-file pipeline stages behind the command line.

Each stage takes already-built clients and scorers, so the same code runs
live, against cassettes, or under test. Sample records carry CSV and sidecar
paths relative to the file they are written to; every stage re-anchors them
when it writes a new artifact.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from tsagent.agent.rollout import elicit_turn_descriptions, run_rollout
from tsagent.agent.trajectory import Trajectory, read_jsonl, read_trajectories, write_jsonl
from tsagent.config import Config
from tsagent.corpus.manifest import attach_sources, load_manifest, load_sample, spec_from_record, spec_record
from tsagent.corpus.masking import mask_metadata
from tsagent.corpus.pipeline import pipeline_run
from tsagent.corpus.qc import qc_passed, run_qc
from tsagent.corpus.windowing import generate_windows
from tsagent.errors import GatewayError, MetricError, RolloutError, ScorerError
from tsagent.gateway import ChatClient
from tsagent.metrics import evaluate, judge_accuracy
from tsagent.reward import ScoreResult, build_group_records, compute_scores
from tsagent.scoring.scorers import Scorer
from tsagent.series import NormStats, denormalize
from tsagent.tools import TOOLBOX

log = logging.getLogger(__name__)

SOURCE_KEYS = ("source", "metadata_source")


@dataclass
class StageReport:
    counts: dict = field(default_factory=dict)
    failed: int = 0
    interrupted: bool = False

    @property
    def partial(self) -> bool:
        return self.failed > 0 or self.interrupted

    def to_dict(self) -> dict:
        return {**self.counts, "failed": self.failed, "interrupted": self.interrupted}


def rebase(record: dict, src_dir: str | Path, dst_dir: str | Path) -> dict:
    """Copy of a sample record with source paths made relative to ``dst_dir``."""
    out = dict(record)
    for k in SOURCE_KEYS:
        if out.get(k):
            out[k] = os.path.relpath(os.path.normpath(os.path.join(src_dir, out[k])), dst_dir)
    return out


def _dir(path) -> Path:
    return Path(path).parent


def _jsonable(values) -> list:
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(values, dtype=float)]


def run_samples(fn: Callable, items: Sequence, workers: int = 1) -> tuple[list, bool]:
    """Map ``fn`` over items in order. On Ctrl-C, in-flight items finish,
    queued ones are cancelled, and the completed prefix is returned."""
    out: list = []
    if workers <= 1:
        try:
            for it in items:
                out.append(fn(it))
        except KeyboardInterrupt:
            return out, True
        return out, False
    ex = ThreadPoolExecutor(workers)
    futures = [ex.submit(fn, it) for it in items]
    try:
        for f in futures:
            out.append(f.result())
    except KeyboardInterrupt:
        ex.shutdown(wait=True, cancel_futures=True)
        for f in futures[len(out):]:
            if not f.done() or f.cancelled() or f.exception() is not None:
                break
            out.append(f.result())
        return out, True
    ex.shutdown()
    return out, False


# ---- windows ----


def windows_stage(manifest: str | Path, cfg: Config, out: str | Path) -> tuple[StageReport, dict]:
    """Window every dataset, mask per dataset, write spec JSONL. Returns the
    report and a per-dataset summary."""
    entries = load_manifest(manifest)
    budget = cfg.window_budget()
    specs, summary = [], {}
    for e in entries:
        r = generate_windows(e.series, budget, e.name)
        specs += [attach_sources(w, e, _dir(out)) for w in r.windows]
        summary[e.name] = {"series": len(e.series), "windows": len(r.windows), "stride": r.stride,
                           "before_cap": r.total_before_cap, "warning": r.warning}
    specs = mask_metadata(specs, cfg.windowing.mask_fraction, cfg.windowing.mask_seed)
    n = write_jsonl(out, (spec_record(s) for s in specs))
    return StageReport({"windows": n, "masked": sum(s.masked for s in specs)}), summary


# ---- rollout ----


def rollout_stage(specs_path: str | Path, agent: ChatClient, cfg: Config, out: str | Path,
                  group_size: int | None = None, elicit: bool | None = None, workers: int = 1) -> StageReport:
    """G rollouts per window. A failed rollout is written with status "failed";
    a failed elicitation leaves the trajectory un-elicited and notes the error."""
    base, out_dir = _dir(specs_path), _dir(out)
    G = group_size or cfg.rollout.group_size
    elicit = cfg.rollout.elicit if elicit is None else elicit
    records = list(read_jsonl(specs_path))

    def one(rec):
        spec = spec_from_record(rec)
        sample = load_sample(spec, base)
        ref = rebase(spec_record(spec), base, out_dir)
        trajs = []
        for g in range(G):
            rc = cfg.rollout_config(g)
            try:
                t = run_rollout(sample.context, agent, TOOLBOX, rc, ref, g)
            except (GatewayError, RolloutError) as exc:
                trajs.append(Trajectory(spec.sample_id, [], [], [], {}, ref, g, "failed", exc.to_dict()))
                continue
            if elicit:
                try:
                    t.descriptions = elicit_turn_descriptions(t, agent, rc)
                except (GatewayError, RolloutError) as exc:
                    t.stats["elicit_error"] = exc.to_dict()
            trajs.append(t)
        return trajs

    done, interrupted = run_samples(one, records, workers)
    trajs = [t for ts in done for t in ts]
    write_jsonl(out, (t.to_dict() for t in trajs))
    failed = sum(t.status != "ok" or "elicit_error" in t.stats for t in trajs)
    return StageReport({"samples": len(done), "trajectories": len(trajs)}, failed, interrupted)


# ---- qc ----


def qc_stage(traj_path: str | Path, judge: ChatClient, cfg: Config, verdicts_out: str | Path,
             accepted_out: str | Path | None = None, workers: int = 1) -> StageReport:
    """Judge each trajectory once. Failing a check is a verdict, not an error;
    gateway failures and failed rollouts count as failures."""
    base = _dir(traj_path)
    trajs = read_trajectories(traj_path)
    jc = cfg.judge_config()

    def one(t: Trajectory):
        rec = {"sample_id": t.sample_id, "rollout_index": t.rollout_index, "accepted": False, "verdicts": [],
               "error": None}
        if t.status != "ok":
            rec["error"] = t.error
            return rec, False
        sample = load_sample(spec_from_record(t.sample), base)
        try:
            vs = run_qc(t, judge, sample.context.effective_metadata, sample.future_short, sample.future_long, 1, jc)
        except GatewayError as exc:
            rec["error"] = exc.to_dict()
            return rec, False
        rec["verdicts"] = [v.to_dict() for v in vs]
        rec["accepted"] = qc_passed(vs)
        return rec, True

    done, interrupted = run_samples(one, trajs, workers)
    write_jsonl(verdicts_out, (r for r, _ in done))
    accepted = [t for t, (r, _) in zip(trajs, done) if r["accepted"]]
    if accepted_out is not None:
        for t in accepted:
            t.sample = rebase(t.sample, base, _dir(accepted_out))
        write_jsonl(accepted_out, (t.to_dict() for t in accepted))
    failed = sum(not ok for _, ok in done)
    return StageReport({"judged": len(done), "accepted": len(accepted), "rejected": len(done) - len(accepted) - failed},
                       failed, interrupted)


# ---- reward ----


def _median_column(quantiles) -> int:
    q = list(quantiles)
    return q.index(0.5) if 0.5 in q else len(q) // 2


def reward_stage(traj_path: str | Path, scorer: Scorer, cfg: Config, out: str | Path,
                 pred_out: str | Path | None = None) -> StageReport:
    """Group trajectories by sample, score r^0..r^N, write RL records.

    With ``pred_out``, also writes one eval record per trajectory holding the
    scorer's median long-horizon forecast given the final answer.
    """
    base = _dir(traj_path)
    trajs = read_trajectories(traj_path)
    groups: dict[str, list[Trajectory]] = {}
    for t in trajs:
        groups.setdefault(t.sample_id, []).append(t)
    quantiles = tuple(cfg.reward.quantiles)
    records, preds, failed, invalid = [], [], 0, 0
    for sid, ts in groups.items():
        spec = spec_from_record(ts[0].sample)
        sample = load_sample(spec, base)
        hist, fut = sample.context.history, sample.future_long
        horizons = (spec.short_len, spec.long_len)
        results = []
        for t in ts:
            if t.status != "ok":
                results.append(ScoreResult([None], [{"code": "FAILED_ROLLOUT", "message": "rollout did not finish"}]))
            elif not t.elicited:
                results.append(ScoreResult([None], [{"code": "NOT_ELICITED", "message": "per-turn descriptions missing"}]))
            else:
                results.append(compute_scores(t.descriptions, hist, fut, scorer, horizons, quantiles))
            t.sample = rebase(t.sample, base, _dir(out))
        group = build_group_records(sid, ts, results, cfg.reward.gamma)
        invalid += sum(not r["valid"] for r in group)
        records += group
        if pred_out is None:
            continue
        stats = NormStats.from_history(hist)
        for t in ts:
            if t.final_text is None:
                continue
            try:
                fc = scorer.forecast(hist, t.final_text, (spec.long_len,), quantiles)
            except ScorerError as exc:
                log.warning("%s#%d: no prediction (%s)", sid, t.rollout_index, exc)
                failed += 1
                continue
            pred = denormalize(fc.heads[0][:, _median_column(fc.quantiles)], stats)
            preds.append({"sample_id": sid, "rollout_index": t.rollout_index, "target": _jsonable(fut),
                          "prediction": _jsonable(pred), "mask": np.isfinite(fut).tolist(),
                          "history": _jsonable(hist), "description": t.final_text,
                          "future_short": _jsonable(sample.future_short)})
    write_jsonl(out, records)
    if pred_out is not None:
        write_jsonl(pred_out, preds)
    return StageReport({"groups": len(groups), "records": len(records), "invalid": invalid,
                        "predictions": len(preds)}, failed + invalid)


# ---- eval ----


def _floats(xs) -> list[float]:
    return [float("nan") if v is None else float(v) for v in xs]


def eval_stage(pred_path: str | Path, cfg: Config, judge: ChatClient | None = None) -> dict:
    recs = list(read_jsonl(pred_path))
    report = evaluate(recs, cfg.eval.season, cfg.eval.average)
    if judge is not None:
        if any("description" not in r for r in recs):
            raise MetricError("BAD_PARAM", "judge evaluation needs a description on every record")
        items = [(r["description"], _floats(r.get("future_short", r["target"])), _floats(r["target"])) for r in recs]
        acc = judge_accuracy(items, judge, cfg.judge_config())
        report["judge_accuracy"] = acc.accuracy
        report["judge_malformed"] = acc.malformed
    return report


# ---- full generation ----


def generate_stage(specs_path: str | Path, agent: ChatClient, judge: ChatClient, cfg: Config,
                   corpus_out: str | Path, attempts_out: str | Path | None = None) -> tuple[StageReport, dict]:
    """Rollout, QC and regeneration for every window; accepted trajectories form the corpus."""
    base = _dir(specs_path)
    specs = [spec_from_record(r) for r in read_jsonl(specs_path)]
    res = pipeline_run(specs, lambda s: load_sample(s, base), agent, judge, cfg.rollout_config(), cfg.judge_config())
    corpus = res.corpus
    for t in corpus:
        t.sample = rebase(t.sample, base, _dir(corpus_out))
    write_jsonl(corpus_out, (t.to_dict() for t in corpus))
    if attempts_out is not None:
        write_jsonl(attempts_out, (o.record() for o in res.outcomes))
    report = res.report()
    return StageReport({"accepted": len(corpus)}, report["totals"]["discarded"], res.interrupted), report
