import subprocess
import sys

import numpy as np
import pytest

from tcgan import cli
from tcgan.gan import init_model, load_model
from tcgan.series import load_csv, save_csv, unbalance

TINY_GAN_FLAGS = ["--epochs", "2", "--latent-dim", "4", "--batch-size", "4"]
TINY_INI = """[tcgan]
gen_channels = 4,4,2,1
disc_channels = 4,4
kernel_size = 3
"""


@pytest.fixture
def data(tmp_path):
    assert cli.main(["synth", "-S", "10", "-L", "12", "--out", str(tmp_path / "train.csv"), "--seed", "1"]) == 0
    assert cli.main(["synth", "-S", "5", "-L", "12", "--out", str(tmp_path / "test.csv"), "--seed", "2"]) == 0
    save_csv(unbalance(load_csv(tmp_path / "train.csv"), 1, 4, np.random.default_rng(0)), tmp_path / "unb.csv")
    (tmp_path / "tiny.ini").write_text(TINY_INI)
    return tmp_path


def test_synth_file(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["synth", "-S", "40", "-L", "40", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# tcgan-series v1" and len(lines) == 81


def test_synth_missing_dir(tmp_path, capsys):
    assert cli.main(["synth", "--out", str(tmp_path / "nope" / "s.csv")]) == 2
    assert "nope" in capsys.readouterr().err


def test_unknown_flag_exit_1(capsys):
    assert cli.main(["synth", "--out", "x.csv", "--bogus"]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["train", "--help"])
    assert e.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--epochs", "--latent-dim", "--batch-size", "--seed", "--force", "--config"):
        assert flag in text
    assert "(default: 300)" in text and "(default: 50)" in text


def test_train_writes_checkpoints(data):
    ck = data / "ck"
    args = ["train", str(data / "unb.csv"), "--out", str(ck), "--config", str(data / "tiny.ini")] + TINY_GAN_FLAGS
    assert cli.main(args) == 0
    assert sorted(p.name for p in ck.iterdir()) == ["class0.ckpt", "class0_loss.csv", "class1.ckpt", "class1_loss.csv"]
    m = load_model(ck / "class1.ckpt")
    assert m.config.latent_dim == 4 and m.config.gen_channels == (4, 4, 2, 1) and m.config.epochs == 2
    assert (ck / "class0_loss.csv").read_text().count("\n") == 3
    # existing directory: refused without --force
    assert cli.main(args) == 1
    assert cli.main(args + ["--force"]) == 0


def test_train_zero_epochs_is_init(data):
    ck = data / "ck0"
    args = ["train", str(data / "unb.csv"), "--out", str(ck), "--config", str(data / "tiny.ini"),
            "--epochs", "0", "--latent-dim", "4", "--batch-size", "4", "--seed", "9"]
    assert cli.main(args) == 0
    m = load_model(ck / "class0.ckpt")
    ref = init_model(m.config)
    for k, p in ref.gen.items():
        np.testing.assert_array_equal(p.data, m.gen[k].data)


def test_train_config_and_data_errors(data):
    (data / "bad.ini").write_text("[tcgan]\nnot_a_key = 3\n")
    assert cli.main(["train", str(data / "unb.csv"), "--out", str(data / "a"), "--config", str(data / "bad.ini")]) == 1
    (data / "bad2.ini").write_text("[tcgan]\nkernel_size = 4\n")
    assert cli.main(["train", str(data / "unb.csv"), "--out", str(data / "b"), "--config", str(data / "bad2.ini")]) == 1
    (data / "broken.csv").write_text("# tcgan-series v1\n0,0:1,2:3\n1,5:1,2:3\n")
    assert cli.main(["train", str(data / "broken.csv"), "--out", str(data / "c")]) == 2


def test_augment(data, caplog):
    ck = data / "ck"
    cli.main(["train", str(data / "unb.csv"), "--out", str(ck), "--config", str(data / "tiny.ini")] + TINY_GAN_FLAGS)
    out = data / "aug.csv"
    assert cli.main(["augment", str(data / "unb.csv"), "--ckpt", str(ck), "--ratio", "1.0", "--out", str(out)]) == 0
    aug, orig = load_csv(out), load_csv(data / "unb.csv")
    assert aug.counts() == {0: 10, 1: 10}
    assert aug.items[: len(orig)] == orig.items
    out2 = data / "same.csv"
    assert cli.main(["augment", str(data / "unb.csv"), "--ckpt", str(ck), "--ratio", "0.1", "--out", str(out2)]) == 0
    assert load_csv(out2) == orig
    assert "unchanged" in caplog.text
    assert cli.main(["augment", str(data / "unb.csv"), "--ckpt", str(data / "none"), "--out", str(out2)]) == 2


def test_classify(data, capsys):
    out = data / "scores.csv"
    args = ["classify", "--train", str(data / "train.csv"), "--test", str(data / "test.csv"), "--out", str(out),
            "--epochs", "2", "--ckpt-out", str(data / "clf.ckpt")]
    assert cli.main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "index,label,score" and len(lines) == 11
    assert "AUROC" in capsys.readouterr().out
    assert (data / "clf.ckpt").exists()


def test_experiment_and_errors(data, capsys):
    spec = data / "spec.ini"
    spec.write_text("[experiment]\nkind = compare\nseries_len = 12\nn_runs = 1\ntrain_per_class = 6\n"
                    "test_per_class = 4\nminority_count = 3\nmajority_count = 6\n"
                    "[tcgan]\nepochs = 1\nlatent_dim = 4\n[classifier]\nepochs = 1\n")
    assert cli.main(["experiment", str(spec), "--out-dir", str(data)]) == 0
    printed = capsys.readouterr().out
    assert all(m in printed for m in ("none", "slicing", "warping", "tcgan"))
    assert len((data / "summary.csv").read_text().splitlines()) == 5
    assert cli.main(["experiment", str(spec), "--out-dir", str(data / "missing")]) == 2
    (data / "bad.ini").write_text("[experiment]\nkind = nope\n")
    assert cli.main(["experiment", str(data / "bad.ini")]) == 1
    (data / "bad2.ini").write_text("[experiment]\nkind = rebalance\nratios = 0.05,1.0\n")
    assert cli.main(["experiment", str(data / "bad2.ini")]) == 1


def test_reruns_byte_identical(data):
    def run(tag):
        d = data / tag
        d.mkdir()
        cli.main(["synth", "-S", "6", "-L", "12", "--out", str(d / "s.csv"), "--seed", "5"])
        cli.main(["train", str(data / "unb.csv"), "--out", str(d / "ck"), "--config", str(data / "tiny.ini")]
                 + TINY_GAN_FLAGS)
        cli.main(["augment", str(data / "unb.csv"), "--ckpt", str(d / "ck"), "--out", str(d / "a.csv"), "--seed", "3"])
        cli.main(["classify", "--train", str(d / "a.csv"), "--test", str(data / "test.csv"), "--out",
                  str(d / "c.csv"), "--epochs", "2"])
        return {p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}

    first, second = run("one"), run("two")
    assert len(first) == 7 and first == second


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "tcgan.cli", "synth", "-S", "1", "-L", "4", "--out",
                        str(tmp_path / "x.csv")], capture_output=True, text=True)
    assert r.returncode == 0 and (tmp_path / "x.csv").exists()
    r = subprocess.run([sys.executable, "-m", "tcgan.cli", "synth", "--nope"], capture_output=True, text=True)
    assert r.returncode == 1


def test_optional_spec_fields_accept_blank(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text("[experiment]\nminority_count =\nmajority_count = none\n")
    spec = cli.load_spec(p)
    assert spec.minority_count is None and spec.majority_count is None
    p.write_text("[experiment]\nn_runs =\n")
    with pytest.raises(cli.ConfigError):
        cli.load_spec(p)


def test_demo_specs_parse():
    from pathlib import Path

    specs = sorted((Path(__file__).parent.parent / "demos" / "specs").glob("*.ini"))
    assert specs
    for p in specs:
        cli.load_spec(p)
