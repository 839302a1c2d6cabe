import csv
import json

import numpy as np
import pytest

from rbm_transfer.cli import main
from rbm_transfer.data import bars_and_stripes, read_pgm, save_idx, synthetic_glyphs, downscale
from rbm_transfer.modelio import load_mlp, load_rbm, save_rbm
from rbm_transfer.rbm import RbmParams

from conftest import random_rbm


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_record(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


@pytest.fixture
def bas_rbm(tmp_path, capsys):
    code, _, _ = run(
        capsys, "train-rbm", "--data", "builtin:bas", "--hidden", 6, "--epochs", 5, "--batch", 10,
        "--out", "bas.rbm", "--metrics", "bas.csv", "--out-dir", tmp_path, "--seed", 3,
    )
    assert code == 0
    return tmp_path / "bas.rbm"


@pytest.fixture
def glyph_files(tmp_path):
    ds = downscale(synthetic_glyphs(60, 5, 0), 2)
    images, labels = tmp_path / "g-images.idx", tmp_path / "g-labels.idx"
    save_idx(ds, images, labels)
    return images, labels


def test_train_rbm_outputs_and_manifest(bas_rbm, tmp_path):
    params = load_rbm(bas_rbm)
    assert (params.n_visible, params.n_hidden) == (16, 6)
    rows = list(csv.reader(open(tmp_path / "bas.csv")))
    assert rows[0] == ["epoch", "recon_error", "exact_ll", "wall_ms"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "3", "4", "5"]
    manifest = json.load(open(tmp_path / "train-rbm.manifest.json"))
    assert {"command", "flags", "seed", "git_describe", "wall_ms", "outputs"} <= set(manifest)
    assert manifest["seed"] == 3
    assert manifest["flags"]["hidden"] == 6
    assert str(bas_rbm) in manifest["outputs"]


def test_train_rbm_exact_ll_column(tmp_path, capsys):
    code, out, _ = run(
        capsys, "train-rbm", "--data", "builtin:bas", "--hidden", 4, "--epochs", 2, "--exact-ll",
        "--out", "m.rbm", "--out-dir", tmp_path,
    )
    assert code == 0
    rows = list(csv.reader(out.splitlines()))
    assert all(float(r[2]) < 0 for r in rows[1:])


def test_train_rbm_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        args = ["train-rbm", "--data", "builtin:bas", "--hidden", 5, "--epochs", 4, "--seed", 9]
        assert run(capsys, *args, "--out", f"{name}.rbm", "--out-dir", tmp_path)[0] == 0
    assert (tmp_path / "a.rbm").read_bytes() == (tmp_path / "b.rbm").read_bytes()


def test_train_clf_on_idx_files(glyph_files, tmp_path, capsys):
    images, _ = glyph_files
    code, _, _ = run(capsys, "train-clf", "--data", images, "--hidden", 8, "--epochs", 2, "--out", "c.mlp",
                     "--out-dir", tmp_path)
    assert code == 0
    clf = load_mlp(tmp_path / "c.mlp")
    assert (clf.n_inputs, clf.n_hidden, clf.n_classes) == (196, 8, 10)


def test_transfer_threads_do_not_change_bytes(glyph_files, tmp_path, capsys):
    images, labels = glyph_files
    save_rbm(random_rbm(196, 12, 1, scale=0.1), tmp_path / "r.rbm")
    for threads in (1, 3):
        code, _, _ = run(
            capsys, "transfer", "--rbm", tmp_path / "r.rbm", "--in", images, "--in-labels", labels, "--k", 2,
            "--out", f"t{threads}-images.idx", "--grid", f"t{threads}.pgm", "--threads", threads,
            "--out-dir", tmp_path,
        )
        assert code == 0
    for name in ("t{}-images.idx", "t{}-labels.idx", "t{}.pgm"):
        assert (tmp_path / name.format(1)).read_bytes() == (tmp_path / name.format(3)).read_bytes()
    assert (tmp_path / "t1-labels.idx").read_bytes() == labels.read_bytes()
    grid = read_pgm(tmp_path / "t1.pgm")
    assert grid.shape == (2 * 15 + 1, 10 * 15 + 1)


def test_eval_identical_domains(glyph_files, tmp_path, capsys):
    images, labels = glyph_files
    save_rbm(random_rbm(196, 4, 2, scale=0.1), tmp_path / "r.rbm")
    assert run(capsys, "train-clf", "--data", images, "--hidden", 4, "--epochs", 1, "--out", "c.mlp",
               "--out-dir", tmp_path)[0] == 0
    code, out, _ = run(
        capsys, "eval", "--rbm", tmp_path / "r.rbm", "--clf", tmp_path / "c.mlp", "--source", images,
        "--target", images, "--ks", "1,2", "--out-dir", tmp_path,
    )
    assert code == 0
    report = json.loads(out)
    assert report["target_direct_accuracy"] == report["source_accuracy"]
    assert set(report["target_transferred_accuracy"]) == {"1", "2"}
    rows = list(csv.reader(open(tmp_path / "report.csv")))
    assert rows[0] == ["condition", "k", "accuracy"]
    assert [r[0] for r in rows[1:]] == ["source", "target_direct", "target_transferred", "target_transferred"]


def test_ais_zero_weight_model(tmp_path, capsys):
    path = tmp_path / "z.rbm"
    save_rbm(RbmParams(np.zeros((4, 3)), np.array([0.5, -1, 0, 2]), np.array([1.0, 0, -0.5])), path)
    code, out, _ = run(capsys, "ais", "--rbm", path, "--temperatures", 50, "--chains", 20, "--out-dir", tmp_path)
    assert code == 0
    record = json.loads(out)
    assert record["std_err_log_z"] == 0.0
    assert set(record) == {"mean_log_z", "std_err_log_z", "n_chains", "n_temperatures", "seed"}


def test_sample_grid(bas_rbm, tmp_path, capsys):
    code, _, _ = run(capsys, "sample", "--rbm", bas_rbm, "--chains", 4, "--steps", "1,5", "--grid", "s.pgm",
                     "--out-dir", tmp_path)
    assert code == 0
    grid = read_pgm(tmp_path / "s.pgm")
    # noise row plus one row per snapshot, 4x4 images with 1-pixel padding
    assert grid.shape == (3 * 5 + 1, 4 * 5 + 1)


# ------------------------------------------------------------------- errors


def test_missing_file_is_io_error(tmp_path, capsys):
    code, _, err = run(capsys, "ais", "--rbm", tmp_path / "nope.rbm", "--out-dir", tmp_path)
    assert code == 3
    assert error_record(err)["code"] == 3


def test_bad_magic_is_format_error(tmp_path, capsys):
    (tmp_path / "bad.rbm").write_bytes(b"JUNKJUNKJUNK")
    code, _, err = run(capsys, "ais", "--rbm", tmp_path / "bad.rbm", "--out-dir", tmp_path)
    assert code == 4
    assert error_record(err)["error"] == "BadMagicError"


def test_dimension_mismatch(glyph_files, bas_rbm, tmp_path, capsys):
    images, _ = glyph_files
    code, _, err = run(capsys, "transfer", "--rbm", bas_rbm, "--in", images, "--out", "x-images.idx",
                       "--out-dir", tmp_path)
    assert code == 5
    error_record(err)


def test_exact_ll_capacity(glyph_files, tmp_path, capsys):
    images, _ = glyph_files
    code, _, err = run(capsys, "train-rbm", "--data", images, "--hidden", 30, "--epochs", 1, "--exact-ll",
                       "--out", "m.rbm", "--out-dir", tmp_path)
    assert code == 6
    assert error_record(err)["error"] == "CapacityError"


def test_divergence_is_numerical_error(tmp_path, capsys):
    with np.errstate(over="ignore", invalid="ignore"):
        code, _, err = run(capsys, "train-rbm", "--data", "builtin:bas", "--hidden", 4, "--lr", "1e300",
                           "--epochs", 3, "--out", "m.rbm", "--out-dir", tmp_path)
    assert code == 7
    error_record(err)


@pytest.mark.parametrize(
    "argv",
    [
        ["train-rbm", "--data", "builtin:bas", "--out", "m.rbm", "--bogus"],
        ["train-rbm", "--data", "builtin:nothing", "--out", "m.rbm"],
        ["train-rbm", "--data", "builtin:bas", "--out", "m.rbm", "--k", "0"],
        ["eval", "--rbm", "a", "--clf", "b", "--source", "c", "--target", "d", "--ks", "x"],
        ["frobnicate"],
    ],
)
def test_invalid_arguments(argv, tmp_path, capsys):
    code, _, err = run(capsys, *argv, *(["--out-dir", tmp_path] if argv[0] != "frobnicate" else []))
    assert code == 2
    assert error_record(err)["code"] == 2


def test_missing_labels_file(tmp_path, capsys):
    ds = bars_and_stripes()
    save_idx(ds, tmp_path / "b-images.idx", tmp_path / "other.idx")
    code, _, err = run(capsys, "train-clf", "--data", tmp_path / "b-images.idx", "--out", "c.mlp",
                       "--out-dir", tmp_path)
    assert code == 3
    error_record(err)
