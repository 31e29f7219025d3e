"""Regenerate the bundled end-to-end fixture.

Writes a small two-dataset manifest (a periodic transit-like series and a
sparse spiky one), a config, and agent/judge cassettes recorded from scripted
clients through the same stage functions the CLI runs:

    python tests/fixtures/make_fixtures.py
"""

from __future__ import annotations

import json
import math
import re
import sys
import tempfile
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

from showcase import PERIODIC_FINAL, SPARSE_FINAL  # noqa: E402
from tsagent.config import load_config  # noqa: E402
from tsagent.gateway import RecordingClient, ScriptedClient, text_response, tool_call_response  # noqa: E402
from tsagent.series import Series, write_series_csv  # noqa: E402
from tsagent.stages import generate_stage, qc_stage, rollout_stage, windows_stage  # noqa: E402

E2E = HERE / "e2e"

CONFIG = """\
workers = 1

[windowing]
L = 96
H_s = 8
H_l = 32
d = 48
B_max = 6
B_min = 0
fallback_strides = [24, 12]
mask_fraction = 0.3
mask_seed = 0

[rollout]
group_size = 2
elicit = true

[reward]
gamma = 1.0
"""

DRAFT = ("In the short term, the series is expected to keep the broad shape seen in its recent history. "
         "Fluctuations should stay moderate. No abrupt break is anticipated.\n\n"
         "In the long term, the series should continue its established pattern. "
         "Variability is likely to remain similar. Occasional departures may appear.")


def write_data(d: Path) -> None:
    t0 = datetime(2016, 7, 1)
    rng = np.random.default_rng(2016)

    def stamps(n, minutes):
        return tuple(t0 + timedelta(minutes=minutes * i) for i in range(n))

    k = np.arange(300)
    metro = {f"station_{i}": Series(np.round(200 + 150 * np.sin(2 * np.pi * k / 24 + i) + rng.normal(0, 10, k.size), 3),
                                    stamps(k.size, 15)) for i in range(2)}
    metro["station_short"] = Series(np.round(180 + 120 * np.sin(2 * np.pi * np.arange(100) / 24), 3), stamps(100, 15))
    spikes = np.where(rng.uniform(size=200) < 0.06, rng.uniform(20, 80, 200), 0.0)
    spikes[[37, 38, 120]] = math.nan
    alibaba = {"machine_7": Series(np.round(spikes, 3), stamps(200, 60))}
    write_series_csv(d / "shmetro.csv", metro)
    write_series_csv(d / "alibaba.csv", alibaba)
    (d / "shmetro_meta.json").write_text(json.dumps({sid: {
        "dataset": "SHMetro", "domain": "Transport", "freq": "15min",
        "dataset_description": "Inbound passenger flow at metro stations.", "var_name": "inflow",
        "var_desc": "passengers entering per interval", "unit": "passengers"} for sid in metro}, indent=1))
    (d / "alibaba_meta.json").write_text(json.dumps({"machine_7": {
        "dataset": "Alibaba", "domain": "Cloud", "freq": "H", "dataset_description": "Cluster machine usage trace.",
        "var_name": "disk_io", "var_desc": "disk I/O burst volume", "unit": "MB"}}, indent=1))
    (d / "manifest.json").write_text(json.dumps({"datasets": [
        {"name": "SHMetro", "csv": "shmetro.csv", "metadata": "shmetro_meta.json", "freq": "15min"},
        {"name": "Alibaba", "csv": "alibaba.csv", "metadata": "alibaba_meta.json", "freq": "H"},
    ]}, indent=1))
    (d / "config.toml").write_text(CONFIG)


def agent_script(req):
    """Two tool-calling turns, then a final answer; elicitation gets a draft."""
    user = req.messages[1]["content"]
    if req.tools is None:
        return text_response(DRAFT)
    n = int(re.search(r"- length: (\d+)", user).group(1))
    turn = sum(m["role"] == "assistant" for m in req.messages)
    if turn == 0:
        return tool_call_response([("call_0", "standard_deviation", {"left": 0, "right": n}),
                                   ("call_1", "linear_trend", {"left": 0, "right": n}),
                                   ("call_2", "autocorrelation", {"left": 0, "right": n, "lag": 24})],
                                  content="Checking level, spread and daily repetition first.")
    if turn == 1:
        return tool_call_response([("call_3", "linear_trend", {"left": n - n // 4, "right": n}),
                                   ("call_4", "number_peaks", {"left": n - n // 4, "right": n, "n": 3})])
    return text_response(SPARSE_FINAL if "spik" in user or "Alibaba" in user or "Cloud" in user else PERIODIC_FINAL)


def judge_script():
    """Passes everything except the reasoning check of the third trajectory judged."""
    count = {"traj": 0}

    def script(req):
        prompt = req.messages[0]["content"]
        if "forbidden metadata-like content" in prompt:
            count["traj"] += 1
        if count["traj"] == 3 and "Serialized conversation" in prompt:
            return text_response(json.dumps({"pass": False, "evidence": "only one window scale was inspected"}))
        return text_response(json.dumps({"pass": True, "evidence": "consistent"}))

    return script


def retry_judge_script():
    """For the generation cassette: the first sample fails once, the second fails four times."""
    state = {"attempts": 0}

    def script(req):
        prompt = req.messages[0]["content"]
        if "forbidden metadata-like content" in prompt:
            state["attempts"] += 1
        k = state["attempts"]
        if k == 1 or 3 <= k <= 6:
            return text_response(json.dumps({"pass": False, "evidence": "forecast text names a calendar date"}))
        return text_response(json.dumps({"pass": True, "evidence": "ok"}))

    return script


def main() -> None:
    E2E.mkdir(exist_ok=True)
    write_data(E2E)
    cfg = load_config(E2E / "config.toml")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        windows_stage(E2E / "manifest.json", cfg, tmp / "specs.jsonl")
        rollout_stage(tmp / "specs.jsonl", RecordingClient(ScriptedClient(agent_script), E2E / "agent.jsonl"),
                      cfg, tmp / "traj.jsonl")
        qc_stage(tmp / "traj.jsonl", RecordingClient(ScriptedClient(judge_script()), E2E / "judge.jsonl"),
                 cfg, tmp / "verdicts.jsonl")
        # two windows through the retrying generator
        lines = (tmp / "specs.jsonl").read_text().splitlines()[:2]
        (tmp / "gen_specs.jsonl").write_text("\n".join(lines) + "\n")
        generate_stage(tmp / "gen_specs.jsonl", RecordingClient(ScriptedClient(agent_script), E2E / "gen_agent.jsonl"),
                       RecordingClient(ScriptedClient(retry_judge_script()), E2E / "gen_judge.jsonl"), cfg,
                       tmp / "corpus.jsonl", tmp / "attempts.jsonl")
    print(f"fixtures written to {E2E}")


if __name__ == "__main__":
    main()
