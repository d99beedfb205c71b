import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from neurodyn.cli import build_parser, main
from neurodyn.trialdata import TrialSet, load_trialset, save_trialset

SUBCOMMANDS = ["emg-process", "edm", "reward-eval", "pca", "synth-generate"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth-generate", "--trials", "4", "--seed", "2", "--out", str(d / "s")]) == 0
    return d / "s"


@pytest.mark.parametrize("cmd", SUBCOMMANDS + ["config"])
def test_help_exits_zero(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_help_documents_every_flag():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    for name, p in sub.choices.items():
        for action in p._actions:
            if action.option_strings and action.dest != "help" and name != "config":
                assert action.help, f"{name} {action.option_strings} has no help"


def test_unknown_flag_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["pca", "x.csv", "--out", "o", "--bogus"])
    assert exc.value.code == 2


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "neurodyn.cli", "config", "show"], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["reward"]["lambda_joint"] == 5.0


def test_config_show_round_trip(tmp_path, capsys):
    assert main(["config", "show"]) == 0
    first = capsys.readouterr().out
    path = tmp_path / "c.json"
    path.write_text(first)
    assert main(["config", "show", "--config", str(path)]) == 0
    assert capsys.readouterr().out == first


def test_config_unknown_key(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"envelope": {"clip_length": 30}}))
    assert main(["config", "show", "--config", str(path)]) == 2
    assert "clip_length" in capsys.readouterr().err
    path.write_text(json.dumps({"plots": {}}))
    assert main(["config", "show", "--config", str(path)]) == 2


def test_config_missing_file(tmp_path):
    assert main(["config", "show", "--config", str(tmp_path / "nope.json")]) == 1


def test_synth_outputs(synth):
    for tail in ("_kinematics.csv", "_activations.csv", "_raw_emg.csv"):
        assert synth.with_name(synth.name + tail).exists()
    kin = load_trialset(str(synth) + "_kinematics.csv")
    assert kin.shape[:2] == (4, 60)
    raw = load_trialset(str(synth) + "_raw_emg.csv")
    assert raw.sample_rate_hz == 30000.0
    assert raw.channel_names == ["emg_biceps", "emg_triceps"]


def test_synth_repeatable(tmp_path, synth):
    assert main(["synth-generate", "--trials", "4", "--seed", "2", "--out", str(tmp_path / "s")]) == 0
    for tail in ("_kinematics.csv", "_activations.csv", "_raw_emg.csv"):
        a = (tmp_path / ("s" + tail)).read_bytes()
        assert a == synth.with_name(synth.name + tail).read_bytes()


def test_synth_zero_trials(tmp_path, capsys):
    assert main(["synth-generate", "--trials", "0", "--out", str(tmp_path / "s")]) == 2
    assert "trials" in capsys.readouterr().err


def test_emg_process(tmp_path, synth):
    out = tmp_path / "e"
    assert main(["emg-process", str(synth) + "_raw_emg.csv", "--out", str(out)]) == 0
    env = load_trialset(str(out) + "_envelopes.csv")
    assert env.shape == (4, 60, 2)
    assert np.all((env.data >= 0) & (env.data <= 1))
    summary = json.loads((tmp_path / "e_summary.json").read_text())
    assert summary["clip_len"] == 60
    assert summary["config"]["envelope"]["norm_percentile"] == 98.0


def test_emg_process_config_clip_len(tmp_path, synth):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"envelope": {"clip_len": 30}}))
    out = tmp_path / "e"
    assert main(["emg-process", str(synth) + "_raw_emg.csv", "--config", str(cfg), "--out", str(out)]) == 0
    assert load_trialset(str(out) + "_envelopes.csv").n_timesteps == 30


def test_emg_process_missing_input(tmp_path, capsys):
    assert main(["emg-process", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "e")]) == 1
    assert "missing.csv" in capsys.readouterr().err


def test_edm_single(tmp_path, synth):
    out = tmp_path / "f"
    args = ["edm", "--in", str(synth) + "_kinematics.csv", "--in", str(synth) + "_activations.csv",
            "--source", "q_elbow", "--target", "a_biceps", "--E", "2", "--Tp", "1", "--out", str(out)]
    assert main(args) == 0
    summary = json.loads((tmp_path / "f_summary.json").read_text())
    assert {"rho", "E", "tau", "Tp", "n_pred"} <= set(summary)
    rows = read_csv(tmp_path / "f_forecast.csv")
    assert len(rows) == summary["n_pred"]
    assert list(rows[0]) == ["trial", "timestep", "observed", "predicted"]
    assert (tmp_path / "f_edm.svg").read_text().startswith("<svg")


def test_edm_sweep_grid(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 60)).cumsum(axis=1)
    path = tmp_path / "d.csv"
    save_trialset(TrialSet(np.stack([x, np.tanh(x)], axis=-1), ["src", "tgt"], 200.0), path)
    out = tmp_path / "g"
    args = ["edm", "--in", str(path), "--source", "src", "--target", "tgt", "--sweep",
            "--E-range", "1..6", "--tau-range=-1..-4", "--Tp-range", "1..10",
            "--split", "half_split", "--threads", "1", "--out", str(out)]
    assert main(args) == 0
    rows = read_csv(tmp_path / "g_grid.csv")
    assert len(rows) == 240
    assert list(rows[0]) == ["E", "tau", "Tp", "rho", "n_pred", "best"]
    best = [r for r in rows if r["best"] == "1"]
    assert len(best) == 1
    assert float(best[0]["rho"]) == max(float(r["rho"]) for r in rows)


def test_edm_bad_range(tmp_path, synth):
    args = ["edm", "--in", str(synth) + "_kinematics.csv", "--source", "q_elbow", "--target", "q_elbow",
            "--sweep", "--E-range", "one..two", "--out", str(tmp_path / "x")]
    assert main(args) == 2


def _rollout(tmp_path, T=3, N=60):
    rng = np.random.default_rng(1)
    q = rng.normal(size=(T, N, 2))
    a = np.zeros((T, N, 2))
    save_trialset(TrialSet(np.concatenate([q, a], axis=-1), ["q_shoulder", "q_elbow", "a_biceps", "a_triceps"], 400.0), tmp_path / "roll.csv")
    save_trialset(TrialSet(q, ["q_shoulder", "q_elbow"], 400.0), tmp_path / "ref.csv")
    return tmp_path / "roll.csv", tmp_path / "ref.csv"


def test_reward_eval_perfect_tracking(tmp_path, capsys):
    roll, ref = _rollout(tmp_path)
    out = tmp_path / "r"
    assert main(["reward-eval", "--rollout", str(roll), "--reference", str(ref), "--weights", "joint-only", "--out", str(out)]) == 0
    summary = json.loads((tmp_path / "r_summary.json").read_text())
    assert summary["mean_r_total"] == 5.0
    assert summary["band_hz"] == [10.0, 200.0]
    assert "clamped" in capsys.readouterr().err
    trace = read_csv(tmp_path / "r_trace.csv")
    assert len(trace) == 180
    assert {r["r_total"] for r in trace} == {"5"}


def test_reward_eval_sweep(tmp_path):
    path = tmp_path / "seeds.csv"
    lines = ["param,seed,value"]
    for p in (0.15, 0.0):
        for s, v in enumerate([0, 0, 0, 0, 10]):
            lines.append(f"{p},{s},{v}")
    path.write_text("\n".join(lines) + "\n")
    assert main(["reward-eval", "--sweep-in", str(path), "--out", str(tmp_path / "w")]) == 0
    rows = read_csv(tmp_path / "w_sweep.csv")
    assert [r["param"] for r in rows] == ["0", "0.15"]
    assert list(rows[0]) == ["param", "mean", "ci_lo", "ci_hi", "n"]
    half = (float(rows[0]["ci_hi"]) - float(rows[0]["ci_lo"])) / 2
    assert half == pytest.approx(5.552, abs=0.01)
    assert rows[0]["n"] == "5"


def test_reward_eval_nothing_to_do(tmp_path):
    assert main(["reward-eval", "--out", str(tmp_path / "w")]) == 2


def _acts(tmp_path, D=6):
    rng = np.random.default_rng(2)
    data = rng.normal(size=(4, 10, 3)) @ rng.normal(size=(3, D))
    beh = rng.normal(size=(4, 10, 1))
    names = [f"u{i}" for i in range(D)] + ["q_elbow"]
    save_trialset(TrialSet(np.concatenate([data, beh], axis=-1), names, 200.0), tmp_path / "acts.csv")
    return tmp_path / "acts.csv"


def test_pca_command(tmp_path):
    out = tmp_path / "p"
    assert main(["pca", str(_acts(tmp_path)), "--behavior", "q_elbow", "--out", str(out)]) == 0
    rows = read_csv(tmp_path / "p_embedding.csv")
    assert list(rows[0]) == ["clip", "timestep", "pc1", "pc2", "pc3", "q_elbow"]
    assert len(rows) == 40
    summary = json.loads((tmp_path / "p_summary.json").read_text())
    assert summary["total_ratio"] == pytest.approx(1.0, abs=1e-9)
    assert summary["shape"] == [4, 10, 3]


def test_pca_too_few_channels(tmp_path):
    assert main(["pca", str(_acts(tmp_path, D=2)), "--behavior", "q_elbow", "--out", str(tmp_path / "p")]) == 2


def _snapshot(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


def test_all_commands_bit_identical(tmp_path, synth):
    roll, ref = _rollout(tmp_path)
    acts = _acts(tmp_path)
    runs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        assert main(["emg-process", str(synth) + "_raw_emg.csv", "--out", str(d / "e")]) == 0
        assert main(["edm", "--in", str(synth) + "_kinematics.csv", "--source", "q_elbow", "--target", "qdot_elbow",
                     "--sweep", "--E-range", "1..2", "--tau-range", "-1", "--Tp-range", "1..2", "--out", str(d / "f")]) == 0
        assert main(["reward-eval", "--rollout", str(roll), "--reference", str(ref), "--weights", "physics-aware",
                     "--lambda-energy", "0", "--out", str(d / "r")]) == 0
        assert main(["pca", str(acts), "--out", str(d / "p")]) == 0
        runs.append(_snapshot(d))
    assert runs[0] == runs[1]
    assert len(runs[0]) >= 10
