import json
import subprocess
import sys

import pytest

from accuracy_curriculum import cli
from accuracy_curriculum.errors import NumericalDivergence
from accuracy_curriculum import harness

TINY = {"agent": {"hidden": [16, 16], "warmup": 64, "batch_size": 16, "dtype": "float64"}}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return path


def train(tmp_path, config_file, *extra):
    return cli.main(["train", "--config", str(config_file), "--steps", "200", "--seeds", "2",
                     "--eval-period", "100", "--eval-episodes", "3", "--out", str(tmp_path / "out"),
                     *extra])


def test_train_writes_outputs(tmp_path, config_file, capsys):
    assert train(tmp_path, config_file, "--strategy", "random") == 0
    root = tmp_path / "out" / "random"
    assert sorted(p.name for p in root.iterdir()) == ["aggregate.csv", "config.echo", "eval.csv",
                                                       "runs", "samples.csv"]
    echo = json.loads((root / "config.echo").read_text())
    assert echo["seeds"] == [0, 1] and echo["total_steps"] == 200
    assert str(root) in capsys.readouterr().out


def test_train_seed_list(tmp_path, config_file):
    assert cli.main(["train", "--config", str(config_file), "--steps", "100", "--seeds", "4,7",
                     "--eval-period", "100", "--eval-episodes", "2", "--strategy", "baseline",
                     "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in (tmp_path / "baseline" / "runs").iterdir()) == ["seed_4", "seed_7"]


def test_config_faults_are_exit_1(capsys):
    assert cli.main(["train", "--strategy", "warp"]) == 1
    assert "baseline, random, active" in capsys.readouterr().err
    assert cli.main(["train", "--steps", "10", "--eval-period", "100"]) == 1
    assert cli.main(["train", "--beta", "four"]) == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["train", "--bogus"])
    assert info.value.code == 1


def test_missing_config_file_is_io_fault(tmp_path):
    assert cli.main(["train", "--config", str(tmp_path / "missing.json")]) == 3


def test_divergence_exits_2(tmp_path, config_file, monkeypatch):
    def boom(config, seed, **kw):
        raise NumericalDivergence("boom", 3)

    monkeypatch.setattr(harness, "run_single", boom)
    assert train(tmp_path, config_file) == 2


def test_plot_and_malformed_input(tmp_path, config_file):
    assert train(tmp_path, config_file, "--strategy", "active") == 0
    assert cli.main(["plot", "--in", str(tmp_path / "out"), "--out", str(tmp_path / "svg")]) == 0
    assert sorted(p.name for p in (tmp_path / "svg").iterdir()) == [
        "progress.svg", "proportions.svg", "success.svg"]
    bad = tmp_path / "bad" / "active"
    bad.mkdir(parents=True)
    (bad / "eval.csv").write_text("run_seed,step,epsilon,success_rate,cp\n0,x,0.02,0.5,\n")
    assert cli.main(["plot", "--in", str(bad), "--out", str(tmp_path / "svg2")]) == 3
    assert cli.main(["plot", "--in", str(tmp_path / "empty"), "--out", str(tmp_path / "svg3")]) == 3


def test_selftest_passes(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("[PASS]") == 4


def test_module_entry_point(tmp_path, config_file):
    args = [sys.executable, "-m", "accuracy_curriculum", "train", "--config", str(config_file),
            "--steps", "100", "--seeds", "1", "--eval-period", "100", "--eval-episodes", "2",
            "--out", str(tmp_path)]
    assert subprocess.run(args, capture_output=True).returncode == 0
    assert subprocess.run([sys.executable, "-m", "accuracy_curriculum", "train", "--strategy", "x"],
                          capture_output=True).returncode == 1
