"""Command-line driver: subcommand happy paths, output files, and the
exit-code contract (0 success, 1 contract errors, 2 numeric failures)."""

import subprocess
import sys

import numpy as np
import pytest

from rfrlkit import cli
from rfrlkit.gradcheck import OpCheck

TINY_CONFIG = """\
seed = 3
optim.epochs = 2
optim.batch = 4
data.train_per_class = 8
data.val_per_class = 4
data.test_per_class = 4
data.ood_per_class = 4
aug.enabled = false
"""


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(TINY_CONFIG, encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_run")
    cfg = out / "exp.cfg"
    cfg.write_text(TINY_CONFIG, encoding="utf-8")
    code = cli.main(["train", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    return out


class TestTrain:
    def test_writes_artifacts(self, trained):
        for name in ("best.ckpt", "history.csv", "metrics.csv"):
            assert (trained / name).exists()

    def test_seed_override_changes_run_id(self, config_file, tmp_path, capsys):
        out = tmp_path / "seeded"
        code = cli.main(["train", "--config", str(config_file),
                         "--seed", "9", "--out", str(out)])
        assert code == 0
        capsys.readouterr()
        assert "run-seed9" in (out / "metrics.csv").read_text()

    def test_missing_config_exits_1(self, tmp_path, capsys):
        code = cli.main(["train", "--config", str(tmp_path / "nope.cfg")])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_bad_config_exits_1(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("optim.lr = -1\n", encoding="utf-8")
        code = cli.main(["train", "--config", str(path)])
        assert code == 1
        assert "lr" in capsys.readouterr().err

    def test_numeric_blowup_exits_2(self, tmp_path, capsys):
        path = tmp_path / "hot.cfg"
        path.write_text(TINY_CONFIG + "optim.lr = 1e18\n", encoding="utf-8")
        code = cli.main(["train", "--config", str(path),
                         "--out", str(tmp_path / "hot")])
        assert code == 2
        assert "numeric failure" in capsys.readouterr().err


class TestEval:
    def test_prints_metrics_csv(self, trained, capsys):
        code = cli.main(["eval", "--ckpt", str(trained / "best.ckpt"),
                         "--split", "test"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "run_id,split,accuracy,sensitivity,specificity"
        assert lines[1].startswith("eval-seed3,test,")

    def test_eval_is_deterministic(self, trained, capsys):
        argv = ["eval", "--ckpt", str(trained / "best.ckpt"), "--split", "ood"]
        assert cli.main(argv) == 0
        first = capsys.readouterr().out
        assert cli.main(argv) == 0
        assert capsys.readouterr().out == first

    def test_unknown_split_exits_1(self, trained, capsys):
        code = cli.main(["eval", "--ckpt", str(trained / "best.ckpt"),
                         "--split", "holdout"])
        assert code == 1
        capsys.readouterr()

    def test_corrupt_checkpoint_exits_1(self, tmp_path, capsys):
        path = tmp_path / "broken.ckpt"
        path.write_bytes(b"not a checkpoint at all")
        code = cli.main(["eval", "--ckpt", str(path), "--split", "test"])
        assert code == 1
        capsys.readouterr()


class TestGradcheck:
    def test_pass_exit_0(self, monkeypatch, capsys):
        checks = [OpCheck(name="add", max_rel_err=1e-7)]
        monkeypatch.setattr(cli, "run_suite", lambda: checks)
        assert cli.main(["gradcheck"]) == 0
        out = capsys.readouterr().out
        assert "add" in out and "PASS" in out

    def test_failure_exit_1(self, monkeypatch, capsys):
        checks = [OpCheck(name="add", max_rel_err=1e-7),
                  OpCheck(name="conv2d", max_rel_err=0.3)]
        monkeypatch.setattr(cli, "run_suite", lambda: checks)
        assert cli.main(["gradcheck"]) == 1
        assert "FAIL" in capsys.readouterr().out


class TestGradcam:
    def test_writes_named_heatmap_files(self, trained, tmp_path, capsys):
        from rfrlkit.imageops import write_pgm
        img = np.clip(np.random.default_rng(0).uniform(size=(32, 32)), 0, 1)
        pgm = tmp_path / "sample.pgm"
        write_pgm(pgm, img)
        out = tmp_path / "maps"
        code = cli.main(["gradcam", "--ckpt", str(trained / "best.ckpt"),
                         "--input", str(pgm), "--class", "1",
                         "--stage", "n-1", "--method", "all",
                         "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out.strip().splitlines()
        assert len(printed) == 6  # two methods x three files each
        for method in ("cam", "campp"):
            for suffix in (".pgm", "_overlay.pgm", ".rft"):
                assert (out / f"sample_{method}_n-1_c1{suffix}").exists()

    def test_bad_stage_rejected(self, trained, capsys):
        code = cli.main(["gradcam", "--ckpt", str(trained / "best.ckpt"),
                         "--input", "x.pgm", "--class", "0",
                         "--stage", "n-3", "--method", "cam"])
        assert code == 1
        capsys.readouterr()


class TestSynth:
    def test_exports_directory_tree(self, config_file, tmp_path, capsys):
        out = tmp_path / "data"
        code = cli.main(["synth", "--spec", str(config_file),
                         "--out", str(out)])
        assert code == 0
        for name, per_class in (("train", 8), ("val", 4), ("test", 4),
                                ("ood", 4)):
            for cls in ("class_0", "class_1", "class_2"):
                files = list((out / name / cls).glob("*.pgm"))
                assert len(files) == per_class, (name, cls)
        capsys.readouterr()


class TestAblate:
    def test_happy_path(self, tmp_path, capsys):
        cfg = tmp_path / "small.cfg"
        cfg.write_text(
            "optim.epochs = 1\noptim.batch = 4\n"
            "data.train_per_class = 4\ndata.val_per_class = 2\n"
            "data.test_per_class = 2\ndata.ood_per_class = 2\n"
            "aug.enabled = false\n", encoding="utf-8")
        out = tmp_path / "ablation"
        code = cli.main(["ablate", "--config", str(cfg),
                         "--seeds", "1,2", "--out", str(out)])
        assert code == 0
        summary = capsys.readouterr().out.strip().splitlines()
        assert summary[0].startswith("variant,split,median_accuracy")
        assert len(summary) == 1 + 3 * 2  # three variants x two splits

        rows = (out / "ablate.csv").read_text().strip().splitlines()
        assert rows[0] == "variant,seed,split,accuracy,sensitivity,specificity"
        assert len(rows) == 1 + 3 * 2 * 2  # variants x splits x seeds
        assert (out / "ablate_summary.csv").exists()
        for variant in ("classifier", "classifier_decoder", "full"):
            for seed in (1, 2):
                assert (out / f"{variant}-seed{seed}" / "best.ckpt").exists()

    def test_bad_seed_list_exits_1(self, config_file, capsys):
        code = cli.main(["ablate", "--config", str(config_file),
                         "--seeds", "one,two"])
        assert code == 1
        capsys.readouterr()


class TestParser:
    def test_no_command_exits_1(self, capsys):
        assert cli.main([]) == 1
        capsys.readouterr()

    def test_unknown_command_exits_1(self, capsys):
        assert cli.main(["frobnicate"]) == 1
        capsys.readouterr()

    def test_console_script_installed(self):
        proc = subprocess.run([sys.executable, "-m", "rfrlkit.cli"],
                              capture_output=True, text=True)
        assert proc.returncode == 1  # no subcommand is a usage error
