import csv
import re
import subprocess
import sys

import pytest

from neurozip.cli import main
from neurozip.data import load_dataset
from neurozip.evaluation import read_report

TINY = ["--epochs", "20", "--hidden", "6x2"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "data"
    assert main(["generate", "--out", str(path), "--n", "4", "--duration", "1.5"]) == 0
    return path


def test_generate_counts(capsys, tmp_path):
    code, out, _ = run(capsys, "generate", "--scenario", "trans_fault_composite", "--n", "50",
                       "--out", tmp_path / "d")
    assert code == 0 and "trans_fault_composite: 50 trajectories" in out
    data = load_dataset(tmp_path / "d")
    assert len(data) == 50 and len({t.id for t in data}) == 50


def test_generate_default_counts(capsys, tmp_path):
    code, out, _ = run(capsys, "generate", "--out", tmp_path / "d", "--duration", "1.5")
    assert code == 0
    assert "dist_fault: 20" in out and "trans_fault_zload: 50" in out
    assert "trans_fault_composite: 50" in out


def test_generate_rejects_zero(capsys, tmp_path):
    code, _, err = run(capsys, "generate", "--n", "0", "--out", tmp_path / "d")
    assert code == 2 and "--n" in err
    assert not (tmp_path / "d").exists()


def test_generate_is_byte_identical(capsys, tmp_path):
    for d in ("a", "b"):
        assert run(capsys, "generate", "--n", "2", "--seed", "5", "--out", tmp_path / d)[0] == 0
    for name in ("trajectories.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bad_arguments_exit_2(capsys, tmp_path):
    assert run(capsys, "train", "--data", tmp_path, "--out", tmp_path / "c", "--hidden", "20")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "train", "--data", tmp_path, "--out", tmp_path / "c", "--epochs", "0")[0] != 0


def test_missing_files_fail(capsys, tmp_path, dataset):
    assert run(capsys, "train", "--data", tmp_path / "none", "--out", tmp_path / "c")[0] != 0
    assert run(capsys, "eval", "--checkpoint", tmp_path / "none.json", "--data", dataset)[0] != 0


def _metric(out):
    return next(line for line in out.splitlines() if line.startswith("["))


def test_train_then_eval_reproduces_metrics(capsys, tmp_path, dataset):
    ck = tmp_path / "ck.json"
    code, out, _ = run(capsys, "train", "--data", dataset, "--out", ck, *TINY,
                       "--report", tmp_path / "r.txt")
    assert code == 0 and ck.exists()
    assert re.search(r"epochs_run=\d+ best_epoch=\d+", out)
    trained = _metric(out)
    code, out, _ = run(capsys, "eval", "--checkpoint", ck, "--data", dataset, "--out", tmp_path / "e")
    assert code == 0 and _metric(out) == trained
    rep = read_report(tmp_path / "e" / "report_neuro_zip_test.txt")
    assert rep == read_report(tmp_path / "r.txt")


def test_eval_modes_and_comparison(capsys, tmp_path, dataset):
    ck = tmp_path / "ck.json"
    assert run(capsys, "train", "--data", dataset, "--out", ck, *TINY)[0] == 0
    tid = load_dataset(dataset)[0].id
    outs = {}
    for mode in ("zip-only", "neuro-zip"):
        code, out, _ = run(capsys, "eval", "--checkpoint", ck, "--data", dataset, "--mode", mode,
                           "--out", tmp_path / "e", "--emit-trajectory", tid)
        assert code == 0
        outs[mode] = _metric(out)
        with open(tmp_path / "e" / f"comparison_{tid}_{mode.replace('-', '_')}.csv") as fh:
            rows = list(csv.DictReader(fh))
        outs[mode, "rows"] = rows
    assert "a=1.0 b=1.0" in outs["zip-only"] and outs["zip-only"] != outs["neuro-zip"]
    z, n = outs["zip-only", "rows"], outs["neuro-zip", "rows"]
    for key in ("t", "p_ref", "q_ref", "p_zip", "q_zip"):
        assert [r[key] for r in z] == [r[key] for r in n]
    assert [r["p_fit"] for r in z] == [r["p_zip"] for r in z]
    assert [r["p_fit"] for r in n] != [r["p_fit"] for r in z]


def test_eval_unknown_trajectory(capsys, tmp_path, dataset):
    ck = tmp_path / "ck.json"
    assert run(capsys, "train", "--data", dataset, "--out", ck, *TINY)[0] == 0
    code, _, err = run(capsys, "eval", "--checkpoint", ck, "--data", dataset,
                       "--emit-trajectory", "no-such-id")
    assert code == 2 and "no-such-id" in err


def test_eval_subsets(capsys, tmp_path, dataset):
    ck = tmp_path / "ck.json"
    assert run(capsys, "train", "--data", dataset, "--out", ck, *TINY)[0] == 0
    for subset in ("train", "val", "all"):
        code, out, _ = run(capsys, "eval", "--checkpoint", ck, "--data", dataset, "--subset", subset)
        assert code == 0 and _metric(out).startswith(f"[{subset}/neuro_zip]")


def test_gradcheck_passes(capsys):
    code, out, _ = run(capsys, "gradcheck", "--max-trajectories", "3", "--hidden", "8x2")
    assert code == 0 and out.strip().endswith("PASS")


def test_gradcheck_coarse_epsilon_still_small(capsys):
    code, out, _ = run(capsys, "gradcheck", "--max-trajectories", "3", "--hidden", "8x2",
                       "--epsilon", "1e-2")
    err = float(re.search(r"max_relative_error=(\S+)", out).group(1))
    assert err < 1e-2


def test_gradcheck_detects_corrupted_derivative(capsys):
    code, out, _ = run(capsys, "gradcheck", "--max-trajectories", "3", "--hidden", "8x2",
                       "--corrupt-op", "tanh")
    assert code == 1 and out.strip().endswith("FAIL")


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "neurozip.cli", "generate", "--n", "1",
                           "--out", str(tmp_path / "d"), "--duration", "1.5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert "wrote 3 trajectories" in proc.stdout
