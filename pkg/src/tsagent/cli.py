"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 tool error
(``tool run``), 3 partial failure (some samples failed; outputs and report
were still written). Machine-readable output goes to stdout, logs to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from tsagent.agent.trajectory import dumps
from tsagent.config import Config, load_config
from tsagent.errors import TsAgentError
from tsagent.gateway import RecordingClient, ReplayClient
from tsagent.scoring.scorers import RemoteScorer, SeasonalNaiveScorer
from tsagent.series import read_series_csv
from tsagent.tools import TOOLBOX

log = logging.getLogger("tsagent")

EXIT_OK, EXIT_USAGE, EXIT_TOOL, EXIT_PARTIAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config(p):
    p.add_argument("--config", help="TOML config file (defaults apply to anything omitted)")


def _add_client(p, who, prefix=""):
    g = p.add_mutually_exclusive_group()
    g.add_argument(f"--{prefix}replay", metavar="CASSETTE", help=f"serve {who} completions from a cassette")
    g.add_argument(f"--{prefix}record", metavar="CASSETTE", help=f"record live {who} completions to a cassette")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tsagent", description="Tool-using time-series reasoning pipeline.")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tool = sub.add_parser("tool", help="run one analysis tool").add_subparsers(dest="tool_command", required=True,
                                                                             parser_class=_Parser)
    tr = tool.add_parser("run", help="run a tool on one series and print its observation JSON")
    tr.add_argument("name", help="tool name (see `tool list`)")
    tr.add_argument("--input", required=True, help="CSV with columns series_id,timestamp,value")
    tr.add_argument("--series-id", help="series to use when the CSV holds several")
    tr.add_argument("--left", type=int, default=0, help="window start, inclusive (default 0)")
    tr.add_argument("--right", type=int, help="window end, exclusive (default: series length)")
    tr.add_argument("--param", action="append", default=[], metavar="K=V",
                    help="extra tool argument; V is parsed as JSON when possible (repeatable)")
    tool.add_parser("list", help="print the tool names")

    w = sub.add_parser("windows", help="cut windows from a manifest and apply metadata masking")
    w.add_argument("--manifest", required=True, help="manifest JSON")
    _add_config(w)
    w.add_argument("-o", "--output", required=True, help="window spec JSONL")

    r = sub.add_parser("rollout", help="run G agent rollouts per window")
    r.add_argument("--specs", required=True, help="window spec JSONL from `windows`")
    _add_config(r)
    _add_client(r, "agent")
    r.add_argument("--group-size", type=int, help="rollouts per window (config: rollout.group_size)")
    r.add_argument("--elicit", action=argparse.BooleanOptionalAction, default=None,
                   help="elicit per-turn descriptions for reward scoring (config: rollout.elicit)")
    r.add_argument("-o", "--output", required=True, help="trajectory JSONL")

    q = sub.add_parser("qc", help="judge trajectories with the three quality checks")
    q.add_argument("--traj", required=True, help="trajectory JSONL")
    _add_config(q)
    _add_client(q, "judge")
    q.add_argument("-o", "--output", required=True, help="verdict JSONL")
    q.add_argument("--accepted", help="write trajectories passing every check here")

    rw = sub.add_parser("reward", help="score per-turn descriptions and write RL batch records")
    rw.add_argument("--traj", required=True, help="trajectory JSONL")
    _add_config(rw)
    rw.add_argument("--scorer", required=True, help="'naive' or 'remote:URL'")
    rw.add_argument("-o", "--output", required=True, help="RL batch JSONL")
    rw.add_argument("--pred-out", help="also write median-forecast eval records here")

    e = sub.add_parser("eval", help="forecast metrics and optional judge accuracy")
    e.add_argument("--pred", required=True, help="eval JSONL {sample_id, target, prediction, mask, history}")
    _add_config(e)
    e.add_argument("--judge", action="store_true", help="also run the forecast-accuracy judge")
    _add_client(e, "judge")
    e.add_argument("--season", type=int, help="MASE season (config: eval.season, default 1)")
    e.add_argument("--average", choices=("micro", "macro"), help="pooling over samples (config: eval.average)")

    gen = sub.add_parser("generate", help="rollout, QC and retries in one pass to build a corpus")
    gen.add_argument("--specs", required=True, help="window spec JSONL")
    _add_config(gen)
    _add_client(gen, "agent")
    _add_client(gen, "judge", "judge-")
    gen.add_argument("-o", "--output", required=True, help="accepted corpus JSONL")
    gen.add_argument("--attempts", help="per-sample attempt log JSONL")
    return ap


def _client(replay, record, section):
    if replay:
        return ReplayClient(replay)
    live = section.client()
    return RecordingClient(live, record) if record else live


def _scorer(spec: str, cfg: Config):
    if spec == "naive":
        return SeasonalNaiveScorer(cfg.reward.naive_season)
    if spec.startswith("remote:") and len(spec) > len("remote:"):
        return RemoteScorer(spec[len("remote:"):], timeout=cfg.reward.scorer_timeout, max_concurrency=cfg.workers)
    return None


def _emit(obj) -> None:
    sys.stdout.write(dumps(obj) + "\n")


def _report(name: str, obj) -> None:
    print(f"{name}: {json.dumps(obj, sort_keys=True)}", file=sys.stderr)


def _tool_run(args) -> int:
    if args.name not in TOOLBOX:
        print(f"unknown tool {args.name!r}; available: {', '.join(TOOLBOX.names)}", file=sys.stderr)
        return EXIT_USAGE
    series_map = read_series_csv(args.input)
    if args.series_id is not None:
        if args.series_id not in series_map:
            print(f"series {args.series_id!r} not in {args.input}", file=sys.stderr)
            return EXIT_USAGE
        series = series_map[args.series_id]
    elif len(series_map) == 1:
        (series,) = series_map.values()
    else:
        print(f"{args.input} holds {len(series_map)} series; pass --series-id", file=sys.stderr)
        return EXIT_USAGE
    arguments = {"left": args.left, "right": len(series) if args.right is None else args.right}
    for kv in args.param:
        k, sep, v = kv.partition("=")
        if not sep or not k:
            print(f"--param expects K=V, got {kv!r}", file=sys.stderr)
            return EXIT_USAGE
        try:
            arguments[k] = json.loads(v)
        except ValueError:
            arguments[k] = v
    outcome = TOOLBOX.invoke(series, args.name, arguments)
    _emit(outcome.observation())
    return EXIT_OK if outcome.ok else EXIT_TOOL


def _dispatch(args) -> int:
    from tsagent import stages

    if args.command == "tool":
        if args.tool_command == "list":
            for name in TOOLBOX.names:
                print(name)
            return EXIT_OK
        return _tool_run(args)

    cfg = load_config(args.config)
    workers = 1 if getattr(args, "replay", None) else cfg.workers
    if args.command == "windows":
        rep, summary = stages.windows_stage(args.manifest, cfg, args.output)
        for name, s in summary.items():
            _report(f"dataset {name}", s)
            if s["warning"]:
                log.warning(s["warning"])
    elif args.command == "rollout":
        if args.group_size is not None and args.group_size < 1:
            print("--group-size must be >= 1", file=sys.stderr)
            return EXIT_USAGE
        agent = _client(args.replay, args.record, cfg.llm)
        rep = stages.rollout_stage(args.specs, agent, cfg, args.output, args.group_size, args.elicit, workers)
    elif args.command == "qc":
        judge = _client(args.replay, args.record, cfg.judge)
        rep = stages.qc_stage(args.traj, judge, cfg, args.output, args.accepted, workers)
    elif args.command == "reward":
        scorer = _scorer(args.scorer, cfg)
        if scorer is None:
            print(f"--scorer must be 'naive' or 'remote:URL', got {args.scorer!r}", file=sys.stderr)
            return EXIT_USAGE
        rep = stages.reward_stage(args.traj, scorer, cfg, args.output, args.pred_out)
    elif args.command == "eval":
        if args.season is not None:
            cfg.eval.season = args.season
        if args.average is not None:
            cfg.eval.average = args.average
        judge = _client(args.replay, args.record, cfg.judge) if args.judge else None
        _emit(stages.eval_stage(args.pred, cfg, judge))
        return EXIT_OK
    else:  # generate
        agent = _client(args.replay, args.record, cfg.llm)
        judge = _client(args.judge_replay, args.judge_record, cfg.judge)
        rep, report = stages.generate_stage(args.specs, agent, judge, cfg, args.output, args.attempts)
        _emit(report)
    _report(args.command, rep.to_dict())
    return EXIT_PARTIAL if rep.partial else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except TsAgentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
