"""End-to-end CLI coverage: synth gen / train / eval / sweep, exit codes."""

import json

import pytest
from click.testing import CliRunner

from emgkin.cli import main
from emgkin.io import load_model


TINY_YAML = """\
protocol: P1
seed: 5
cnn:
  epochs: 1
  batch: 128
  lr0: 1.0e-4
lstm:
  epochs: 2
  batch: 64
  lr0: 1.0e-3
"""


def _invoke(args, env=None):
    runner = CliRunner()
    return runner.invoke(main, args, env=env, catch_exceptions=False)


def _all_output(result) -> str:
    try:
        return result.output + result.stderr
    except ValueError:  # stderr merged into output on this click version
        return result.output


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One 20 s session dir, one session-pair dir, and a tiny YAML config."""
    root = tmp_path_factory.mktemp("cli")
    result = _invoke(
        ["synth", "gen", "--duration", "20", "--seed", "5", "--out",
         str(root / "solo")]
    )
    assert result.exit_code == 0, result.output
    result = _invoke(
        ["synth", "gen", "--duration", "20", "--seed", "5", "--pair", "--out",
         str(root / "pair")]
    )
    assert result.exit_code == 0, result.output
    (root / "tiny.yaml").write_text(TINY_YAML)
    return root


@pytest.fixture(scope="module")
def trained(workspace):
    """A checkpoint trained through the CLI on the solo session."""
    out = workspace / "model.ckpt"
    result = _invoke(
        ["train", "--config", str(workspace / "tiny.yaml"),
         "--data", str(workspace / "solo"), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    return out, result


def test_version_flag():
    result = _invoke(["--version"])
    assert result.exit_code == 0
    assert "emgkin" in result.output


def test_synth_gen_is_deterministic(tmp_path):
    for name in ("a", "b"):
        result = _invoke(
            ["synth", "gen", "--duration", "2", "--seed", "3", "--out",
             str(tmp_path / name)]
        )
        assert result.exit_code == 0, result.output
    assert (tmp_path / "a" / "emg.csv").read_bytes() == (
        tmp_path / "b" / "emg.csv"
    ).read_bytes()
    assert (tmp_path / "a" / "angles.csv").exists()
    assert (tmp_path / "a" / "meta.json").exists()


def test_synth_gen_pair_layout(workspace):
    children = sorted(p.name for p in (workspace / "pair").iterdir())
    assert children == ["s0", "s0_b"]
    for child in children:
        assert (workspace / "pair" / child / "emg.csv").is_file()


def test_banner_reports_effective_config(trained):
    _, result = trained
    first = result.output.splitlines()[0]
    assert first.startswith("effective-config: ")
    payload = json.loads(first.removeprefix("effective-config: "))
    assert payload["command"] == "train"
    assert payload["config"]["cnn"]["epochs"] == 1
    assert payload["config"]["protocol"] == "P1"


def test_train_writes_checkpoint_and_losses(workspace, trained):
    out, result = trained
    assert "final cnn loss" in result.output
    assert "final lstm loss" in result.output
    assert out.is_file()
    losses = (workspace / "model.losses.csv").read_text().splitlines()
    assert losses[0] == "stage,epoch,loss"
    assert len(losses) == 1 + 1 + 2  # header + cnn epochs + lstm epochs

    model = load_model(out)
    assert model.k == 18
    assert model.dof_names == ["fe"]


def test_train_cli_overrides_reach_checkpoint(workspace, tmp_path):
    out = tmp_path / "k8.ckpt"
    result = _invoke(
        ["train", "--config", str(workspace / "tiny.yaml"),
         "--data", str(workspace / "solo"), "--out", str(out), "--k", "8"]
    )
    assert result.exit_code == 0, result.output
    assert load_model(out).k == 8


def test_train_missing_data_dir_exits_2(workspace, tmp_path):
    result = _invoke(
        ["train", "--config", str(workspace / "tiny.yaml"),
         "--data", str(tmp_path / "void"), "--out", str(tmp_path / "m.ckpt")]
    )
    assert result.exit_code == 2
    assert "does not exist" in _all_output(result)


def test_eval_intra_writes_report_and_trajectory(workspace, trained, tmp_path):
    out, _ = trained
    report_path = tmp_path / "report.json"
    result = _invoke(
        ["eval", "--model", str(out), "--data", str(workspace / "solo"),
         "--report", str(report_path)]
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(report_path.read_text())
    assert isinstance(payload, dict)  # single model -> single object
    assert payload["model"] == "cnn-lstm"
    assert payload["split"].startswith("intra:")
    assert "cnn-lstm: fe=" in result.output

    traj = (tmp_path / "report.trajectory.csv").read_text().splitlines()
    assert traj[0] == "t,true,pred,dof"
    assert len(traj) == 1 + len(payload["trajectory"]["t"])


def test_eval_baselines_writes_report_array(workspace, trained, tmp_path):
    out, _ = trained
    report_path = tmp_path / "report.json"
    result = _invoke(
        ["eval", "--model", str(out), "--data", str(workspace / "solo"),
         "--report", str(report_path), "--baselines"]
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(report_path.read_text())
    assert [entry["model"] for entry in payload] == ["cnn-lstm", "cnn", "krr"]
    for name in ("cnn-lstm:", "cnn:", "krr:"):
        assert name in result.output


def test_eval_intra_rejects_multi_session_dir(workspace, trained, tmp_path):
    out, _ = trained
    result = _invoke(
        ["eval", "--model", str(out), "--data", str(workspace / "pair"),
         "--report", str(tmp_path / "r.json")]
    )
    assert result.exit_code == 2
    assert "exactly one session" in _all_output(result)


def test_eval_inter_rejects_single_session_dir(workspace, trained, tmp_path):
    out, _ = trained
    result = _invoke(
        ["eval", "--model", str(out), "--data", str(workspace / "solo"),
         "--split", "inter", "--report", str(tmp_path / "r.json")]
    )
    assert result.exit_code == 2
    assert "needs two sessions" in _all_output(result)


def test_eval_inter_session_pair(workspace, tmp_path):
    # Inter-session training uses the full first session, no fold split.
    out = tmp_path / "inter.ckpt"
    result = _invoke(
        ["train", "--config", str(workspace / "tiny.yaml"),
         "--data", str(workspace / "pair"), "--out", str(out),
         "--split", "inter"]
    )
    assert result.exit_code == 0, result.output

    report_path = tmp_path / "inter.json"
    result = _invoke(
        ["eval", "--model", str(out), "--data", str(workspace / "pair"),
         "--split", "inter", "--report", str(report_path)]
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(report_path.read_text())
    assert payload["split"] == "inter:s0->s0_b"


def test_eval_corrupt_checkpoint_exits_1(workspace, tmp_path):
    bad = tmp_path / "noise.ckpt"
    bad.write_bytes(b"not a checkpoint at all")
    result = _invoke(
        ["eval", "--model", str(bad), "--data", str(workspace / "solo"),
         "--report", str(tmp_path / "r.json")]
    )
    assert result.exit_code == 1
    assert "corrupt checkpoint" in _all_output(result)


def test_sweep_matrixmode_outputs(workspace, tmp_path):
    out_dir = tmp_path / "modes"
    result = _invoke(
        ["sweep", "--what", "matrixmode", "--config",
         str(workspace / "tiny.yaml"), "--data", str(workspace / "solo"),
         "--out", str(out_dir)]
    )
    assert result.exit_code == 0, result.output
    lines = (out_dir / "summary.csv").read_text().splitlines()
    assert lines[0] == (
        "variant,k,matrix_mode,input_len,runtime_s,r2_mean,r2_fe,r2_ps,r2_ru"
    )
    assert [line.split(",")[0] for line in lines[1:]] == ["spectral", "temporal"]

    spectral = json.loads((out_dir / "spectral.json").read_text())
    temporal = json.loads((out_dir / "temporal.json").read_text())
    assert spectral["input_len"] == 101
    assert temporal["input_len"] == 102


def test_sweep_timesteps_outputs(workspace, tmp_path):
    out_dir = tmp_path / "ks"
    result = _invoke(
        ["sweep", "--what", "timesteps", "--config",
         str(workspace / "tiny.yaml"), "--data", str(workspace / "solo"),
         "--out", str(out_dir)]
    )
    assert result.exit_code == 0, result.output
    lines = (out_dir / "summary.csv").read_text().splitlines()
    assert [line.split(",")[0] for line in lines[1:]] == ["k8", "k18", "k58", "k98"]

    # trajectory length is M - k + 1 for the shared test fold, so lengths
    # must shrink one-for-one as k grows
    lengths = {}
    for k in (8, 18, 58, 98):
        payload = json.loads((out_dir / f"k{k}.json").read_text())
        assert payload["k"] == k
        lengths[k] = len(payload["trajectory"]["t"])
    assert lengths[8] - lengths[18] == 10
    assert lengths[18] - lengths[58] == 40
    assert lengths[58] - lengths[98] == 40


def test_threads_env_must_be_positive_integer(workspace, tmp_path):
    args = ["sweep", "--what", "matrixmode", "--config",
            str(workspace / "tiny.yaml"), "--data", str(workspace / "solo"),
            "--out", str(tmp_path / "x")]
    result = _invoke(args, env={"EMGKIN_THREADS": "abc"})
    assert result.exit_code == 2
    assert "must be an integer" in _all_output(result)

    result = _invoke(args, env={"EMGKIN_THREADS": "0"})
    assert result.exit_code == 2
    assert "must be >= 1" in _all_output(result)


def test_unknown_protocol_choice_rejected(tmp_path):
    result = _invoke(
        ["synth", "gen", "--protocol", "P9", "--out", str(tmp_path)]
    )
    assert result.exit_code == 2  # click usage error
