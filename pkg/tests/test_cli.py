import json

import pytest

from cubenn import write_hsc, write_hsg
from cubenn.cli import main

from conftest import make_synthetic


@pytest.fixture
def toy_files(tmp_path):
    dataset = make_synthetic(nclass=3, bands=8, height=18, width=18, noise=0.05, seed=2)
    cube_path = tmp_path / "toy.hsc"
    gt_path = tmp_path / "toy.hsg"
    write_hsc(cube_path, dataset.cube)
    write_hsg(gt_path, dataset.gt)
    return dataset, cube_path, gt_path


def _train_args(cube, gt, out, **over):
    args = {
        "--cube": str(cube), "--gt": str(gt), "--family": "b", "--spatial": "1",
        "--split": "count:20", "--seed": "1", "--epochs": "2", "--runs": "1",
        "--eval-batch": "64", "--out": str(out),
    }
    args.update(over)
    flat = ["train"]
    for k, v in args.items():
        flat.extend([k, v])
    return flat


# --- trace ----------------------------------------------------------------------

def test_trace_family_d_prints_budget(capsys):
    assert main(["trace", "--family", "d", "--spatial", "5",
                 "--bands", "103", "--classes", "9"]) == 0
    out = capsys.readouterr().out
    final_line = out.strip().splitlines()[-1]
    assert final_line.startswith("params:")
    assert int(final_line.split()[1]) < 7000
    assert "reference params: 6862" in out


def test_out_dir_env_var(toy_files, tmp_path, monkeypatch, capsys):
    _, cube, gt = toy_files
    target = tmp_path / "from_env"
    monkeypatch.setenv("CUBENN_OUT", str(target))
    args = _train_args(cube, gt, target)
    idx = args.index("--out")
    del args[idx: idx + 2]  # rely on the environment variable instead
    assert main(args) == 0
    capsys.readouterr()
    assert (target / "checkpoint.ckpt").exists()


def test_trace_family_b_n1_has_no_spatial_kernels(capsys):
    assert main(["trace", "--family", "b", "--spatial", "1"]) == 0
    out = capsys.readouterr().out
    assert "3x3" not in out


def test_trace_invalid_custom_spec_exits_3(tmp_path, capsys):
    spec_file = tmp_path / "bad.spec"
    spec_file.write_text(
        "conv 4 3,3,3 1,1,1 1,0,0 relu\n"
        "conv 4 3,3,3 1,1,1 1,0,0 relu\n"  # spatial over-collapse at n=3
        "fc 2\n"
    )
    code = main(["trace", "--spec-file", str(spec_file), "--spatial", "3",
                 "--bands", "16", "--classes", "2"])
    assert code == 3
    assert "error:" in capsys.readouterr().err


# --- train ------------------------------------------------------------------------

def test_train_happy_path_writes_artifacts(toy_files, tmp_path, capsys):
    _, cube, gt = toy_files
    out = tmp_path / "run"
    assert main(_train_args(cube, gt, out)) == 0
    stdout = capsys.readouterr().out
    assert "train=60" in stdout           # 3 classes x count:20
    assert "mean accuracy:" in stdout
    for name in ("checkpoint.ckpt", "report_run0.json", "loss_run0.csv",
                 "accuracy_run0.csv", "summary.json"):
        assert (out / name).exists(), name


def test_train_dimension_mismatch_exits_2(toy_files, tmp_path, capsys):
    dataset, cube, _ = toy_files
    other = make_synthetic(nclass=3, bands=8, height=9, width=9)
    bad_gt = tmp_path / "bad.hsg"
    write_hsg(bad_gt, other.gt)
    code = main(_train_args(cube, bad_gt, tmp_path / "x"))
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and "mismatch" in err


def test_train_missing_file_exits_2(tmp_path, capsys):
    code = main(_train_args(tmp_path / "none.hsc", tmp_path / "none.hsg", tmp_path / "y"))
    assert code == 2
    assert capsys.readouterr().err.startswith("error:")


def test_train_seeded_rerun_reproduces_outputs(toy_files, tmp_path, capsys):
    _, cube, gt = toy_files
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(_train_args(cube, gt, out_a)) == 0
    assert main(_train_args(cube, gt, out_b)) == 0
    capsys.readouterr()
    assert (out_a / "checkpoint.ckpt").read_bytes() == (out_b / "checkpoint.ckpt").read_bytes()
    assert (out_a / "loss_run0.csv").read_bytes() == (out_b / "loss_run0.csv").read_bytes()
    ra = json.loads((out_a / "report_run0.json").read_text())
    rb = json.loads((out_b / "report_run0.json").read_text())
    ra.pop("wall_time_s"), rb.pop("wall_time_s")
    assert ra == rb


# --- eval / classify / transfer -----------------------------------------------------

def test_eval_roundtrip(toy_files, tmp_path, capsys):
    _, cube, gt = toy_files
    out = tmp_path / "run"
    assert main(_train_args(cube, gt, out, **{"--epochs": "3"})) == 0
    assert main(["eval", "--cube", str(cube), "--gt", str(gt),
                 "--init-from", str(out / "checkpoint.ckpt"),
                 "--out", str(tmp_path / "eval")]) == 0
    stdout = capsys.readouterr().out
    assert "accuracy:" in stdout
    assert (tmp_path / "eval" / "eval.json").exists()


def test_classify_writes_map(toy_files, tmp_path, capsys):
    _, cube, gt = toy_files
    out = tmp_path / "run"
    assert main(_train_args(cube, gt, out)) == 0
    assert main(["classify", "--cube", str(cube), "--gt", str(gt),
                 "--init-from", str(out / "checkpoint.ckpt"),
                 "--out", str(tmp_path / "maps")]) == 0
    capsys.readouterr()
    pgm = (tmp_path / "maps" / "map.pgm").read_bytes()
    assert pgm.startswith(b"P5\n18 18\n255\n")
    assert len(pgm.split(b"255\n", 1)[1]) == 18 * 18
    legend = json.loads((tmp_path / "maps" / "map_legend.json").read_text())
    assert legend["1"] == "stripe_1"


def test_transfer_command(toy_files, tmp_path, capsys):
    _, cube, gt = toy_files
    out = tmp_path / "run"
    assert main(_train_args(cube, gt, out)) == 0

    target = make_synthetic(nclass=2, bands=8, height=16, width=16, noise=0.05, seed=5)
    t_cube, t_gt = tmp_path / "t.hsc", tmp_path / "t.hsg"
    write_hsc(t_cube, target.cube)
    write_hsg(t_gt, target.gt)
    code = main(["transfer", "--cube", str(t_cube), "--gt", str(t_gt),
                 "--init-from", str(out / "checkpoint.ckpt"),
                 "--split", "frac:0.2", "--epochs", "2", "--seed", "3",
                 "--out", str(tmp_path / "ft")])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "accuracy:" in stdout
    ckpt = (tmp_path / "ft" / "checkpoint.ckpt")
    assert ckpt.exists()
    manifest = json.loads(ckpt.read_bytes().split(b"\n", 1)[0])
    assert manifest["spec"]["nclass"] == 2


# --- sweep -----------------------------------------------------------------------------

def test_sweep_single_fraction_single_row(toy_files, tmp_path, capsys):
    _, cube, gt = toy_files
    code = main(["sweep", "--cube", str(cube), "--gt", str(gt),
                 "--family", "b", "--spatial", "1", "--fractions", "0.2",
                 "--epochs", "1", "--runs", "1", "--seed", "1",
                 "--out", str(tmp_path / "sw")])
    assert code == 0
    capsys.readouterr()
    rows = (tmp_path / "sw" / "sweep.csv").read_text().strip().splitlines()
    assert rows[0] == "fraction,mean_accuracy,deviation"
    assert len(rows) == 2 and rows[1].startswith("0.2,")


# --- config file --------------------------------------------------------------------------

def test_toml_config_supplies_defaults(toy_files, tmp_path, capsys):
    _, cube, gt = toy_files
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('[trace]\nfamily = "c"\nbands = 40\n')
    assert main(["trace", "--config", str(cfg), "--spatial", "3", "--classes", "4"]) == 0
    out = capsys.readouterr().out
    assert "family=c" in out and "f=40" in out


def test_cli_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('[trace]\nbands = 40\n')
    assert main(["trace", "--config", str(cfg), "--family", "b", "--spatial", "1",
                 "--bands", "24"]) == 0
    assert "f=24" in capsys.readouterr().out
