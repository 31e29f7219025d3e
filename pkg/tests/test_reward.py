import json
import math
from importlib import resources

import jsonschema
import numpy as np
import pytest

from tsagent.agent.trajectory import Trajectory, dumps
from tsagent.errors import RewardError
from tsagent.reward import (
    TurnCredit,
    attach_token_advantages,
    build_group_records,
    compute_returns,
    compute_scores,
    deltas,
    group_normalize,
)
from tsagent.scoring import SeasonalNaiveScorer


def direct_returns(d, gamma):
    n = len(d)
    return [math.fsum(gamma ** (j - i) * d[j] for j in range(i, n)) for i in range(n)]


def test_returns_examples():
    s = [-1.0, -0.8, -0.9, -0.5]
    d = deltas(s)
    np.testing.assert_allclose(d, [0.2, -0.1, 0.4], atol=1e-12)
    np.testing.assert_allclose(compute_returns(d, 1.0), [0.5, 0.3, 0.4], atol=1e-12)
    np.testing.assert_allclose(compute_returns(d, 0.5), [0.25, 0.1, 0.4], atol=1e-12)
    np.testing.assert_allclose(compute_returns(d, 0.0), d)
    with pytest.raises(RewardError):
        compute_returns(d, 1.5)


def test_telescoping_and_direct_definition():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        s = rng.normal(size=int(rng.integers(2, 10)))
        c = TurnCredit(tuple(s), 1.0)
        assert c.returns[0] == pytest.approx(s[-1] - s[0], abs=1e-12)
        g = float(rng.uniform())
        np.testing.assert_allclose(compute_returns(c.deltas, g), direct_returns(c.deltas, g), rtol=0, atol=1e-12)


def test_group_normalize_examples():
    assert [a.tolist() for a in group_normalize([[1.0], [-1.0]])] == [[1.0], [-1.0]]
    out = group_normalize([[0.3, 0.3], [0.3]])
    assert all(np.all(a == 0) for a in out)
    with pytest.raises(RewardError) as e:
        group_normalize([[1.0, 2.0]])
    assert e.value.code == "DEGENERATE_GROUP"
    with pytest.raises(RewardError):
        group_normalize([[], [1.0]])


def test_group_normalize_pooled_moments_and_permutation():
    rng = np.random.default_rng(1)
    for _ in range(300):
        g = int(rng.integers(2, 9))
        rs = [rng.normal(size=int(rng.integers(1, 8))) * rng.uniform(0.1, 10) for _ in range(g)]
        out = group_normalize(rs)
        pooled = np.concatenate(out)
        assert abs(pooled.mean()) <= 1e-9
        assert abs(pooled.std() - 1) <= 1e-9
        perm = rng.permutation(g)
        out_p = group_normalize([rs[i] for i in perm])
        for k, i in enumerate(perm):
            np.testing.assert_allclose(out_p[k], out[i], rtol=0, atol=1e-12)


def test_text_blind_scorer_gives_zero_deltas():
    rng = np.random.default_rng(2)
    hist, fut = rng.normal(size=200), rng.normal(size=20)
    res = compute_scores(["", "short", "a much longer description"], hist, fut, SeasonalNaiveScorer(), (5, 20))
    assert res.valid and len(set(res.scores)) == 1
    assert np.all(deltas(res.scores) == 0)


class LengthScorer:
    """Sharper median forecasts for longer descriptions (test double)."""

    def forecast(self, history, description, horizons, quantiles):
        from tsagent.scoring import QuantileForecast

        shift = 1.0 / max(len(description), 1)
        return QuantileForecast(tuple(np.full((h, len(quantiles)), shift) for h in horizons), tuple(horizons), quantiles)


def test_improving_scores_for_longer_descriptions():
    hist = np.arange(10.0)
    fut = np.full(4, np.mean(hist))
    res = compute_scores(["a", "abcd", "abcdefghij"], hist, fut, LengthScorer(), (4,), (0.5,))
    assert res.scores[0] < res.scores[1] < res.scores[2]


def test_scorer_failure_flags_turn():
    res = compute_scores(["x", "y"], [1.0, 2.0], [1.0], SeasonalNaiveScorer(5), (1,))
    assert not res.valid
    assert res.errors[0]["code"] == "WINDOW_TOO_SHORT"


def _traj(n_turns, tokens=(5, 7, 3, 4, 2, 6, 1, 9)):
    msgs = [{"role": "system", "content": "s"}, {"role": "user", "content": "u"}]
    bounds = []
    for i in range(n_turns - 1):
        lo = len(msgs)
        msgs.append({"role": "assistant", "content": None,
                     "tool_calls": [{"id": f"c{i}", "type": "function",
                                     "function": {"name": "standard_deviation", "arguments": "{}"}}]})
        msgs.append({"role": "tool", "tool_call_id": f"c{i}", "content": "{}"})
        bounds.append((lo, len(msgs)))
    bounds.append((len(msgs), len(msgs) + 1))
    msgs.append({"role": "assistant", "content": "In the short term, x."})
    return Trajectory("s1", msgs, bounds, ["d"] * (n_turns + 1), {"turn_tokens": list(tokens[:n_turns])})


def test_attach_token_advantages():
    t = _traj(2)
    spans = attach_token_advantages(t, [0.5, -0.5])
    assert spans == [
        {"turn": 1, "message_index": 2, "start": 0, "end": 5, "advantage": 0.5},
        {"turn": 2, "message_index": 4, "start": 5, "end": 12, "advantage": -0.5},
    ]
    assert all(t.messages[s["message_index"]]["role"] == "assistant" for s in spans)
    assert json.loads(dumps(spans)) == spans
    t.stats = {}
    with pytest.raises(RewardError) as e:
        attach_token_advantages(t, [0.5, -0.5])
    assert e.value.code == "MISSING_TOKENIZATION"


def test_group_records_validate_against_schema():
    schema = json.loads(resources.files("tsagent").joinpath("schemas/rl_batch.schema.json").read_text())
    from tsagent.reward import ScoreResult

    trajs = [_traj(3), _traj(1), _traj(2)]
    for i, t in enumerate(trajs):
        t.rollout_index = i
    results = [ScoreResult([-1.0, -0.8, -0.9, -0.5], [None] * 4), ScoreResult([-1.0, -0.7], [None, None]),
               ScoreResult([-1.0, None, -0.2], [None, {"code": "TRANSPORT", "message": ""}, None])]
    recs = build_group_records("g", trajs, results, 0.9)
    assert len(recs) == 3
    for r in recs:
        jsonschema.validate(r, schema)
        assert r["gamma"] == 0.9 and r["group_size"] == 3
    assert recs[2]["valid"] is False and recs[2]["spans"] == []
    pooled = np.concatenate([recs[0]["advantages"], recs[1]["advantages"]])
    assert abs(pooled.mean()) < 1e-9
    assert json.loads(dumps(recs)) == recs
