"""End-to-end command-line flows on a small generated benchmark:
exit codes, artifact layout, config precedence, and report determinism."""

import json

import numpy as np
import pytest

from evos.checkpoint import file_sha256, load_checkpoint
from evos.cli import main
from evos.data import load_csv


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    rc = run(
        "gen-data",
        "--out-dir",
        str(d),
        "--k",
        "3",
        "--n-per-class",
        "60",
        "--ood-n",
        "60",
        "--seed",
        "0",
    )
    assert rc == 0
    return d


@pytest.fixture(scope="module")
def model_path(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("run") / "model.json"
    rc = run(
        "train",
        "--train-csv",
        str(data_dir / "train.csv"),
        "--val-csv",
        str(data_dir / "val.csv"),
        "--out",
        str(out),
        "--objective",
        "tun",
        "--epochs",
        "30",
        "--seed",
        "0",
    )
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def calibrated_path(data_dir, model_path):
    rc = run(
        "calibrate",
        "--checkpoint",
        str(model_path),
        "--val-csv",
        str(data_dir / "val.csv"),
    )
    assert rc == 0
    return model_path


# ---------------------------------------------------------------------------
# exit codes


def test_no_arguments_is_usage_error(capsys):
    assert run() == 2
    capsys.readouterr()


def test_unknown_subcommand_is_usage_error(capsys):
    assert run("frobnicate") == 2
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert run("--help") == 0
    assert "gen-data" in capsys.readouterr().out


def test_missing_file_is_data_error(tmp_path, capsys):
    rc = run(
        "eval",
        "--checkpoint",
        str(tmp_path / "absent.json"),
        "--test-csv",
        str(tmp_path / "absent.csv"),
    )
    assert rc == 3
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "Traceback" not in err


def test_numeric_failure_exit_code(data_dir, tmp_path, capsys):
    with np.errstate(over="ignore", invalid="ignore"):
        rc = run(
            "train",
            "--train-csv",
            str(data_dir / "train.csv"),
            "--out",
            str(tmp_path / "m.json"),
            "--epochs",
            "3",
            "--learning-rate",
            "1e150",
        )
    assert rc == 4
    assert "numeric failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# gen-data


def test_gen_data_writes_expected_files(data_dir):
    for name in (
        "train.csv",
        "val.csv",
        "test.csv",
        "ood_far_cluster.csv",
        "ood_ring.csv",
        "manifest.json",
    ):
        assert (data_dir / name).exists(), name


def test_gen_data_manifest_hashes_match(data_dir):
    manifest = json.loads((data_dir / "manifest.json").read_text())
    for name, digest in manifest["files"].items():
        assert file_sha256(data_dir / name) == digest, name


def test_gen_data_split_sizes(data_dir):
    tr = load_csv(data_dir / "train.csv")
    va = load_csv(data_dir / "val.csv")
    te = load_csv(data_dir / "test.csv")
    assert (len(tr), len(va), len(te)) == (108, 36, 36)  # 60*3 split 6:2:2
    assert tr.n_classes == 3


def test_gen_data_k_flag_sets_class_count(tmp_path):
    rc = run("gen-data", "--out-dir", str(tmp_path), "--k", "9", "--n-per-class", "10")
    assert rc == 0
    assert load_csv(tmp_path / "train.csv").n_classes == 9


def test_gen_data_same_seed_identical_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("gen-data", "--out-dir", str(d), "--n-per-class", "20", "--seed", "5") == 0
    for name in ("train.csv", "val.csv", "test.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_gen_data_unseen_split(tmp_path):
    rc = run(
        "gen-data",
        "--out-dir",
        str(tmp_path),
        "--n-per-class",
        "20",
        "--unseen-sigma",
        "1.5",
    )
    assert rc == 0
    # the unseen set keeps class labels: same centers, larger spread
    unseen = load_csv(tmp_path / "unseen.csv")
    assert len(unseen) == 100  # 20 per class x 5 default classes, unsplit
    assert unseen.n_classes == 5
    assert np.all(unseen.labels >= 0)


# ---------------------------------------------------------------------------
# train


def test_train_writes_checkpoint_log_and_snapshots(model_path):
    model, tc, fingerprint, _ = load_checkpoint(model_path)
    assert tc.epochs == 30 and tc.objective == "tun"
    assert model.config.output_dim == 3
    assert len(fingerprint) == 64  # sha256 of the training csv
    assert model_path.with_suffix(".log.jsonl").exists()
    snaps = sorted(model_path.parent.glob("model.snap*.json"))
    assert len(snaps) == 5


def test_train_epochs_zero_gives_loadable_checkpoint(data_dir, tmp_path):
    out = tmp_path / "untrained.json"
    rc = run(
        "train",
        "--train-csv",
        str(data_dir / "train.csv"),
        "--out",
        str(out),
        "--epochs",
        "0",
    )
    assert rc == 0
    model, tc, _, _ = load_checkpoint(out)
    assert tc.epochs == 0
    assert model.config.input_dim == 2


def test_train_config_file_and_flag_precedence(data_dir, tmp_path):
    cfg = tmp_path / "train.cfg"
    cfg.write_text("epochs=2\nlearning-rate=0.005\n# comment\n")
    out_file = tmp_path / "file.json"
    rc = run(
        "train",
        "--config",
        str(cfg),
        "--train-csv",
        str(data_dir / "train.csv"),
        "--out",
        str(out_file),
    )
    assert rc == 0
    _, tc, _, _ = load_checkpoint(out_file)
    assert tc.epochs == 2 and tc.learning_rate == 0.005

    out_flag = tmp_path / "flag.json"
    rc = run(
        "train",
        "--config",
        str(cfg),
        "--train-csv",
        str(data_dir / "train.csv"),
        "--out",
        str(out_flag),
        "--epochs",
        "4",
    )
    assert rc == 0
    _, tc, _, _ = load_checkpoint(out_flag)
    assert tc.epochs == 4  # flag beats file
    assert tc.learning_rate == 0.005  # file beats default


def test_unknown_config_key_is_data_error(data_dir, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("warp-speed=9\n")
    rc = run(
        "train",
        "--config",
        str(cfg),
        "--train-csv",
        str(data_dir / "train.csv"),
        "--out",
        str(tmp_path / "m.json"),
        "--epochs",
        "1",
    )
    assert rc == 3
    assert "warp_speed" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# calibrate / eval


def test_calibrate_stores_threshold(calibrated_path, capsys):
    model, _, _, calib = load_checkpoint(calibrated_path)
    assert calib is not None
    assert model.threshold == calib.threshold
    assert 0.0 < calib.threshold <= 1.0


def test_eval_thresholded_requires_calibration(data_dir, tmp_path, capsys):
    out = tmp_path / "uncal.json"
    assert (
        run(
            "train",
            "--train-csv",
            str(data_dir / "train.csv"),
            "--out",
            str(out),
            "--epochs",
            "1",
        )
        == 0
    )
    rc = run(
        "eval",
        "--checkpoint",
        str(out),
        "--test-csv",
        str(data_dir / "test.csv"),
        "--thresholded",
    )
    assert rc == 3
    assert "calibrate" in capsys.readouterr().err


def test_eval_prints_accuracy(calibrated_path, data_dir, capsys):
    rc = run(
        "eval",
        "--checkpoint",
        str(calibrated_path),
        "--test-csv",
        str(data_dir / "test.csv"),
    )
    assert rc == 0
    assert "unthresholded: acc" in capsys.readouterr().out


def test_eval_report_is_deterministic(calibrated_path, data_dir, tmp_path, capsys):
    reports = []
    for name in ("r1.json", "r2.json"):
        path = tmp_path / name
        rc = run(
            "eval",
            "--checkpoint",
            str(calibrated_path),
            "--test-csv",
            str(data_dir / "test.csv"),
            "--thresholded",
            "--report",
            str(path),
        )
        assert rc == 0
        reports.append(path.read_bytes())
    assert reports[0] == reports[1]
    obj = json.loads(reports[0])
    assert obj["kind"] == "report"
    assert "thresholded" in obj["sections"]
    capsys.readouterr()


# ---------------------------------------------------------------------------
# ood-eval


def test_ood_eval_reports_rates(calibrated_path, data_dir, tmp_path, capsys):
    report = tmp_path / "ood.json"
    rc = run(
        "ood-eval",
        "--checkpoint",
        str(calibrated_path),
        "--ood-csv",
        str(data_dir / "ood_far_cluster.csv"),
        str(data_dir / "ood_ring.csv"),
        "--report",
        str(report),
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "detection rate" in out
    obj = json.loads(report.read_text())
    files = obj["sections"]["files"]
    assert len(files) == 2
    for sec in files.values():
        assert 0.0 <= sec["detection_rate"] <= 1.0
        assert sum(sec["histogram_counts"]) == sec["n"]


def test_ood_eval_requires_calibration(data_dir, tmp_path, capsys):
    out = tmp_path / "uncal.json"
    assert (
        run(
            "train",
            "--train-csv",
            str(data_dir / "train.csv"),
            "--out",
            str(out),
            "--epochs",
            "1",
        )
        == 0
    )
    rc = run(
        "ood-eval",
        "--checkpoint",
        str(out),
        "--ood-csv",
        str(data_dir / "ood_ring.csv"),
    )
    assert rc == 3
    capsys.readouterr()


# ---------------------------------------------------------------------------
# compare


def test_compare_lists_missing_artifacts(data_dir, tmp_path, capsys):
    rc = run(
        "compare",
        "--checkpoint-dir",
        str(tmp_path),
        "--val-csv",
        str(data_dir / "val.csv"),
        "--test-csv",
        str(data_dir / "test.csv"),
    )
    assert rc == 3
    err = capsys.readouterr().err
    assert "uios.json" in err and "standard.json" in err and "mcdrop.json" in err


def test_compare_full_run(data_dir, tmp_path, capsys):
    cmp_dir = tmp_path / "cmp"
    train_csv = str(data_dir / "train.csv")
    common = ["--train-csv", train_csv, "--epochs", "25", "--seed", "0"]
    assert run("train", *common, "--out", str(cmp_dir / "uios.json"), "--objective", "tun") == 0
    assert (
        run("train", *common, "--out", str(cmp_dir / "standard.json"), "--objective", "standard_ce")
        == 0
    )
    assert (
        run(
            "train",
            *common,
            "--out",
            str(cmp_dir / "mcdrop.json"),
            "--objective",
            "standard_ce",
            "--dropout-rate",
            "0.25",
        )
        == 0
    )
    report = tmp_path / "compare.json"
    rc = run(
        "compare",
        "--checkpoint-dir",
        str(cmp_dir),
        "--val-csv",
        str(data_dir / "val.csv"),
        "--test-csv",
        str(data_dir / "test.csv"),
        "--ood-csv",
        str(data_dir / "ood_ring.csv"),
        "--report",
        str(report),
    )
    assert rc == 0
    out = capsys.readouterr().out
    for method in ("uios", "entropy", "mc_drop", "ensemble", "tta"):
        assert method in out
    obj = json.loads(report.read_text())
    assert set(obj["sections"]["methods"]) == {
        "uios",
        "entropy",
        "mc_drop",
        "ensemble",
        "tta",
    }
    timing = report.parent / (report.name + ".timing.json")
    assert timing.exists()
    timings = json.loads(timing.read_text())
    assert all(v > 0 for v in timings["ms_per_sample"].values())
