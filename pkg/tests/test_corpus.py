import json
import math

import numpy as np
import pytest

from showcase import PERIODIC_FINAL
from tsagent.agent import SampleContext
from tsagent.agent.trajectory import Trajectory
from tsagent.corpus import (
    LoadedSample,
    WindowBudgetConfig,
    WindowSpec,
    generate_windows,
    mask_metadata,
    pipeline_run,
    process_sample,
    series_windows,
    sqrt_budgets,
)
from tsagent.corpus.qc import CHECKS, parse_verdict, run_qc, serialize_conversation
from tsagent.errors import ConfigError, GatewayError
from tsagent.gateway import ScriptedClient, text_response, tool_call_response
from tsagent.series import Metadata
from window_oracle import budgets as oracle_budgets
from window_oracle import oracle, random_manifest

# ---- windowing ----


def test_hand_traced_counts():
    cfg = WindowBudgetConfig()
    assert generate_windows([("a", 800)], cfg).windows == []
    (w,) = generate_windows([("a", 2000)], cfg).windows
    assert w.kind == "max_length" and w.hist_start == 0 and w.hist_len == 1280 and w.end == 2000
    ws = series_windows("a", 3792, cfg, cfg.d)
    assert len(ws) == 3 and [w.hist_start for w in ws] == [0, 512, 1024]
    assert ws[-1].end == 3792
    # a lone series is far below B_min=500, so the dataset falls back to stride 64
    r = generate_windows([("a", 3792)], cfg)
    assert r.stride == 64 and len(r.windows) == 17 and r.warning is not None
    assert len(generate_windows([("a", 3792)], WindowBudgetConfig(B_min=0)).windows) == 3
    assert sqrt_budgets([100, 400], 30) == [10, 20]


def test_band_edges():
    cfg = WindowBudgetConfig(B_min=0)
    assert generate_windows([("a", 815)], cfg).windows == []
    assert generate_windows([("a", 816)], cfg).windows[0].hist_len == 96
    assert generate_windows([("a", 2767)], cfg).windows[0].kind == "max_length"
    assert generate_windows([("a", 2768)], cfg).windows[0].kind == "sliding"


def _as_tuples(ws):
    return [(w.series_id, w.hist_start, w.hist_len, w.kind) for w in ws]


def test_matches_brute_force_enumerator():
    rng = np.random.default_rng(7)
    for _ in range(200):
        series, cfg = random_manifest(rng)
        r = generate_windows(series, cfg, "ds")
        want, stride, bs = oracle(series, cfg)
        assert _as_tuples(r.windows) == want
        assert r.stride == stride and r.budgets == bs


def test_windows_in_bounds_and_short_prefix():
    rng = np.random.default_rng(8)
    for _ in range(100):
        series, cfg = random_manifest(rng)
        lengths = dict(series)
        for w in generate_windows(series, cfg).windows:
            assert 0 <= w.hist_start and w.hist_len <= cfg.L and w.end <= lengths[w.series_id]
            assert w.short_start == w.long_start == w.hist_start + w.hist_len
            assert w.short_len == cfg.H_s and w.long_len == cfg.H_l


def test_budget_sum_and_monotone():
    rng = np.random.default_rng(9)
    for _ in range(300):
        counts = [int(c) for c in rng.integers(0, 300, size=int(rng.integers(1, 10)))]
        if sum(counts) == 0:
            continue
        total = int(rng.integers(1, sum(counts) + 1))
        b = sqrt_budgets(counts, total)
        assert sum(b) == total and all(0 <= x <= c for x, c in zip(b, counts))
        assert b == oracle_budgets(counts, total)
        for i in range(len(counts)):
            for j in range(len(counts)):
                if counts[i] < counts[j]:
                    assert b[i] <= b[j]


def test_fallback_strides_and_warning():
    r = generate_windows([("a", 2768 + 1024)], WindowBudgetConfig(B_min=10, B_max=50))
    assert r.stride == 64 and len(r.windows) == 17 and r.warning is None
    r = generate_windows([("a", 2768 + 1024)], WindowBudgetConfig(B_min=20, B_max=50))
    assert r.stride == 64 and len(r.windows) == 17 and "fallback" in r.warning
    r = generate_windows([("a", 2768 + 1024)], WindowBudgetConfig(B_min=5, B_max=50))
    assert r.stride == 256 and len(r.windows) == 5 and r.warning is None


def test_bad_config():
    with pytest.raises(ConfigError):
        WindowBudgetConfig(d=64, fallback_strides=(128,))
    with pytest.raises(ConfigError):
        WindowBudgetConfig(H_s=800, H_l=720)
    with pytest.raises(ConfigError):
        generate_windows([("a", -1)])


# ---- masking ----


def _specs(n, ds="A"):
    return [WindowSpec(f"s{i}", 0, 10, 10, 2, 10, 4, "sliding", ds) for i in range(n)]


def test_masking_counts_and_determinism():
    assert not any(s.masked for s in mask_metadata(_specs(10), 0.0))
    assert all(s.masked for s in mask_metadata(_specs(10), 1.0))
    a = mask_metadata(_specs(10), 0.3, seed=5)
    assert sum(s.masked for s in a) == 3
    assert a == mask_metadata(_specs(10), 0.3, seed=5)
    assert mask_metadata(a, 0.3, seed=5) == a
    mixed = mask_metadata(_specs(10, "A") + _specs(7, "B"), 0.3, seed=1)
    assert sum(s.masked for s in mixed[:10]) == 3 and sum(s.masked for s in mixed[10:]) == 2
    with pytest.raises(ConfigError):
        mask_metadata(_specs(2), 1.5)


# ---- QC ----

MD = Metadata(dataset="SHMetro", domain="Transport", freq="15min", unit="passengers")
FUT_S, FUT_L = np.arange(4.0), np.arange(8.0)


def _verdict(ok, evidence="ok"):
    return text_response(json.dumps({"pass": ok, "evidence": evidence}))


def _traj(final=PERIODIC_FINAL):
    msgs = [{"role": "system", "content": "sys"}, {"role": "user", "content": "data"},
            {"role": "assistant", "content": None,
             "tool_calls": [{"id": "c1", "type": "function",
                             "function": {"name": "mean", "arguments": '{"left": 0, "right": 4}'}}]},
            {"role": "tool", "tool_call_id": "c1", "content": '{"value": 1.5}'},
            {"role": "assistant", "content": final}]
    return Trajectory("x", msgs, [(2, 4), (4, 5)], [])


def test_qc_all_pass():
    judge = ScriptedClient([_verdict(True)] * 3)
    vs = run_qc(_traj(), judge, MD, FUT_S, FUT_L)
    assert [v.check for v in vs] == list(CHECKS) and all(v.passed for v in vs)
    assert all(r.tools is None and len(r.messages) == 1 for r in judge.requests)


def test_qc_malformed_short_circuits():
    judge = ScriptedClient([_verdict(True), text_response("looks fine to me")])
    vs = run_qc(_traj(), judge, MD, FUT_S, FUT_L)
    assert len(vs) == 2 and not vs[1].passed and vs[1].malformed and vs[1].evidence == "malformed"
    assert parse_verdict('{"pass": "yes", "evidence": "x"}') == (False, "malformed", True)


def test_qc_leak_prompt_gets_final_verbatim():
    final = PERIODIC_FINAL.replace("recent history.", "recent history around 2016-08-23.")
    judge = ScriptedClient([_verdict(False, "mentions a date")])
    vs = run_qc(_traj(final), judge, MD, FUT_S, FUT_L)
    prompt = judge.requests[0].messages[0]["content"]
    assert final in prompt and "2016-08-23" in prompt and "SHMetro" in prompt
    assert len(vs) == 1 and vs[0].check == "metadata_leak"


def test_qc_long_evidence_flagged():
    judge = ScriptedClient([_verdict(True, "word " * 61)] + [_verdict(True)] * 2)
    vs = run_qc(_traj(), judge, MD, FUT_S, FUT_L)
    assert vs[0].passed and vs[0].evidence_too_long and not vs[1].evidence_too_long


def test_serialized_conversation():
    text = serialize_conversation(_traj().messages)
    assert "sys" not in text.split("\n")[0]
    assert '[tool call] {"call_id": "c1", "name": "mean", "arguments": {"left": 0, "right": 4}}' in text
    assert '[observation c1] {"value": 1.5}' in text


def test_qc_prompts_carry_futures():
    judge = ScriptedClient([_verdict(True)] * 3)
    run_qc(_traj(), judge, MD, FUT_S, FUT_L)
    acc = judge.requests[2].messages[0]["content"]
    assert "0, 1.000, 2.000, 3.000" in acc and PERIODIC_FINAL in acc


# ---- pipeline ----

HIST = np.sin(np.arange(64) / 3.0) * 10 + 50


def _loaded(spec):
    ctx = SampleContext(spec.sample_id, HIST, (4, 8), MD, spec.masked)
    return LoadedSample(ctx, FUT_S, FUT_L)


def _agent():
    return ScriptedClient(lambda req: text_response(PERIODIC_FINAL))


def _judge(plan):
    """plan: per attempt, the index of the failing check or None."""
    script = []
    for fail_at in plan:
        for i, _ in enumerate(CHECKS):
            if fail_at is not None and i == fail_at:
                script.append(_verdict(False, "bad"))
                break
            script.append(_verdict(True))
    return ScriptedClient(script)


def test_fail_then_pass_consumes_one_retry():
    spec = _specs(1)[0]
    judge = _judge([1, None])
    out = process_sample(spec, _loaded(spec), _agent(), judge)
    assert out.accepted is not None and out.retries == 1
    assert [a["attempt"] for a in out.attempts] == [1, 2]
    assert len(judge.requests) == 2 + 3


def test_four_failures_discarded():
    spec = _specs(1)[0]
    agent, judge = _agent(), _judge([0, 2, 1, 0])
    out = process_sample(spec, _loaded(spec), agent, judge)
    assert out.accepted is None and out.retries == 3 and len(agent.requests) == 4
    assert out.record()["retries"] == 3


def test_gateway_error_counts_as_attempt():
    spec = _specs(1)[0]
    agent = ScriptedClient([GatewayError("TRANSPORT", "down"), text_response(PERIODIC_FINAL)])
    out = process_sample(spec, _loaded(spec), agent, _judge([None]))
    assert out.accepted is not None and out.retries == 1
    assert out.attempts[0]["error"]["code"] == "TRANSPORT"


def test_pipeline_report_accounting():
    specs = _specs(3, "A") + _specs(2, "B")
    judge = _judge([None, 0, None, None, 0, 0, 0, 0, None])
    res = pipeline_run(specs, _loaded, _agent(), judge)
    rep = res.report()
    assert rep["datasets"]["A"] == {"windows": 3, "generated": 4, "retried": 1, "accepted": 3, "discarded": 0}
    assert rep["datasets"]["B"] == {"windows": 2, "generated": 5, "retried": 3, "accepted": 1, "discarded": 1}
    assert rep["totals"]["windows"] == len(specs)
    assert rep["totals"]["accepted"] + rep["totals"]["discarded"] == len(specs)
    assert len(res.corpus) == 4 and not rep["interrupted"]


def test_all_pass_no_discards():
    specs = _specs(4)
    res = pipeline_run(specs, _loaded, _agent(), _judge([None] * 4))
    assert res.report()["totals"]["discarded"] == 0


def test_masked_sample_judged_against_unavailable_metadata():
    spec = mask_metadata(_specs(1), 1.0)[0]
    judge = _judge([None])
    process_sample(spec, _loaded(spec), _agent(), judge)
    assert "SHMetro" not in judge.requests[0].messages[0]["content"]
