import subprocess
import sys

import pytest

from switchnorm.cli import main

FAST_TRAIN = ["--steps", "5", "--minibatch-size", "8", "--sample-batches", "2"]


def run(args, tmp_path, capsys):
    code = main(args + ["--out", str(tmp_path)])
    return code, capsys.readouterr().out


def test_gradcheck(tmp_path, capsys):
    code, out = run(["gradcheck", "--shape", "2,3,4,4", "--seed", "7"], tmp_path, capsys)
    lines = out.strip().splitlines()
    assert code == 0
    assert [l.split()[0] for l in lines] == ["input", "gamma", "beta", "lambda_mu", "lambda_var"]
    assert all(float(l.split()[1]) < 1e-5 for l in lines)


def test_gradcheck_threshold_failure(tmp_path, capsys):
    code, _ = run(["gradcheck", "--threshold", "1e-300"], tmp_path, capsys)
    assert code == 1


def test_equiv(tmp_path, capsys):
    code, out = run(["equiv", "--trials", "50", "--seed", "1"], tmp_path, capsys)
    assert code == 0 and out.strip().endswith("pass")
    assert len((tmp_path / "equiv.csv").read_text().splitlines()) == 51


def test_remark1(tmp_path, capsys):
    code, out = run(["remark1"], tmp_path, capsys)
    assert code == 0
    assert out.startswith("in_identity_error=") and "ln_discrepancy=" in out


def test_train_then_weights_report(tmp_path, capsys):
    code, _ = run(["train", *FAST_TRAIN], tmp_path, capsys)
    assert code == 0
    assert (tmp_path / "metrics.csv").exists()
    assert sorted(p.name for p in (tmp_path / "params").iterdir()) == [
        "sn0.manifest", "sn0.snt", "sn1.manifest", "sn1.snt"]
    report_dir = tmp_path / "report"
    code = main(["weights-report", "--params", str(tmp_path / "params"), "--out", str(report_dir)])
    assert code == 0
    assert (report_dir / "weights.csv").read_text() == (tmp_path / "weights.csv").read_text()


def test_calibrate(tmp_path, capsys):
    code, out = run(["calibrate", *FAST_TRAIN], tmp_path, capsys)
    assert code == 0 and "acc_batch_average=" in out
    lines = (tmp_path / "calibration.csv").read_text().splitlines()
    assert lines[0] == "layer,channel,mode,bn_mu,bn_var"
    assert len(lines) == 1 + 2 * 8 * 2


def test_sweep_files(tmp_path, capsys):
    code, out = run(["sweep", "--sizes", "2,4", "--seeds", "3", "--steps", "3",
                     "--sample-batches", "1"], tmp_path, capsys)
    assert code in (0, 1)
    assert (tmp_path / "sweep.csv").exists()
    assert out.startswith("w_bn_large=")


@pytest.mark.parametrize("argv", [
    ["equiv", "--bogus"],
    ["equiv", "--trial", "3"],           # abbreviations are not accepted
    ["gradcheck", "--shape", "2,3,4"],
    ["gradcheck", "--shape", "2,0,4,4"],
    ["gradcheck", "--eps-fd", "-1"],
    ["nosuchcommand"],
    [],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_weights_report_without_manifests(tmp_path, capsys):
    code = main(["weights-report", "--params", str(tmp_path), "--out", str(tmp_path)])
    assert code == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "switchnorm", "equiv", "--trials", "3",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "switchnorm", "equiv", "--nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr
