"""CLI tests: every subcommand, determinism, error reporting."""

import numpy as np
import pytest

from lowrankcnn import checkpoint, cli, initialization, zoo
from lowrankcnn.composite import CompositeConvSpec, FilterGroup
from lowrankcnn.zoo import ArchSpec, CompositeConv, Dense, GlobalMaxPool, ReLU, Softmax


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_models_list_prints_all_names_sorted(capsys):
    code, out, err = run_cli(capsys, "models", "list")
    assert code == 0 and err == ""
    names = out.strip().split("\n")
    assert names == sorted(zoo.MODEL_NAMES)
    assert len(names) == 10


def test_analyze_with_compare_prints_reports_and_savings(capsys):
    code, out, _ = run_cli(
        capsys, "analyze", "--model", "vgg-gmp-lr", "--input", "3x224x224",
        "--compare", "vgg-gmp",
    )
    assert code == 0
    assert "# model: vgg-gmp-lr" in out
    assert "# model: vgg-gmp" in out
    assert "layer,out_shape,macs,params" in out
    # savings against the explicit pair and against both standing baselines
    assert "# savings of vgg-gmp-lr vs vgg-gmp: macs=0.6646" in out
    assert "# savings of vgg-gmp-lr vs vgg11" in out


def test_analyze_accepts_architecture_file(capsys, tmp_path):
    from lowrankcnn import archfile

    path = tmp_path / "custom.arch"
    archfile.save_arch(zoo.build("desk-lr"), path)
    code, out, _ = run_cli(capsys, "analyze", "--model", str(path),
                           "--input", "3x32x32")
    assert code == 0
    assert "# model: desk-lr" in out


def test_analyze_deterministic(capsys):
    a = run_cli(capsys, "analyze", "--model", "desk-lr", "--input", "3x32x32")
    b = run_cli(capsys, "analyze", "--model", "desk-lr", "--input", "3x32x32")
    assert a == b


def test_analyze_unknown_model_errors_once(capsys):
    code, out, err = run_cli(capsys, "analyze", "--model", "vgg-99")
    assert code == 1
    assert err.startswith("error:")
    assert len(err.strip().split("\n")) == 1


def test_analyze_rejects_malformed_input_flag(capsys):
    with pytest.raises(SystemExit):
        cli.main(["analyze", "--model", "vgg11", "--input", "3X224X224"])


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit):
        cli.main(["models", "list", "--json"])


def test_grad_check_deterministic_and_green(capsys):
    code1, out1, _ = run_cli(capsys, "grad-check", "--seed", "7")
    code2, out2, _ = run_cli(capsys, "grad-check", "--seed", "7")
    assert code1 == code2 == 0
    assert out1 == out2
    lines = out1.strip().split("\n")
    assert lines[0] == "op,cases,max_rel_err"
    ops_seen = {l.split(",")[0] for l in lines[1:]}
    assert {"conv2d", "composite", "composite-join", "maxpool",
            "global-maxpool", "relu", "dense", "softmax-xent"} <= ops_seen
    for line in lines[1:]:
        assert float(line.split(",")[2]) < 1e-6


def test_init_probe_csv(capsys, tmp_path):
    code, out, _ = run_cli(
        capsys, "init-probe", "--model", "desk-lr", "--trials", "3",
        "--seed", "5",
    )
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "layer_index,ratio_mean,ratio_std"
    assert len(lines) > 1


def test_train_eval_filters_roundtrip(capsys, tmp_path, synth_cifar_dir):
    config = tmp_path / "train.cfg"
    config.write_text(
        "gamma0 = 0.05\nlambda = 0.001\nbatch = 50\nepochs = 2\nseed = 3\n"
    )
    ckpt = str(tmp_path / "model.ckpt")
    code, out, err = run_cli(
        capsys, "train", "--model", "desk-full", "--data", synth_cifar_dir,
        "--config", str(config), "--out", ckpt,
    )
    assert code == 0, err
    assert "epoch,train_acc,val_acc" in out
    assert (tmp_path / "model.ckpt.history.csv").exists()

    code, out, err = run_cli(capsys, "eval", "--ckpt", ckpt, "--data",
                             synth_cifar_dir)
    assert code == 0, err
    lines = out.strip().split("\n")
    assert lines[0] == "metric,value"
    metrics = dict(l.split(",") for l in lines[1:])
    assert 0.0 <= float(metrics["top1"]) <= 1.0
    assert 0.0 <= float(metrics["top5"]) <= 1.0


def test_train_missing_data_dir_errors(capsys, tmp_path):
    config = tmp_path / "c.cfg"
    config.write_text("gamma0 = 0.1\n")
    code, _, err = run_cli(
        capsys, "train", "--model", "desk-full", "--data",
        str(tmp_path / "nope"), "--config", str(config), "--out",
        str(tmp_path / "m.ckpt"),
    )
    assert code == 1
    assert "error:" in err


def _join_arch():
    spec = CompositeConvSpec(
        (FilterGroup(1, 3, 4), FilterGroup(3, 1, 4)), join=6
    )
    return ArchSpec("joiner", (3, 8, 8), (
        CompositeConv(spec), ReLU(), GlobalMaxPool(), Dense(6, 2), Softmax()
    ))


def test_filters_export_writes_kernel_blocks(capsys, tmp_path):
    arch = _join_arch()
    params = initialization.init_network(arch, 9)
    ckpt = tmp_path / "j.ckpt"
    checkpoint.save_checkpoint(ckpt, arch, params)
    out_csv = tmp_path / "filters.csv"
    code, out, err = run_cli(
        capsys, "filters-export", "--ckpt", str(ckpt), "--layer", "0",
        "--out", str(out_csv),
    )
    assert code == 0, err
    text = out_csv.read_text()
    blocks = [l for l in text.strip().split("\n") if l.startswith("#")]
    assert len(blocks) == 6 * 3  # join outputs x input channels
    rows = [l for l in text.strip().split("\n") if not l.startswith("#")]
    assert all(len(r.split(",")) == 3 for r in rows)


def test_filters_export_rejects_non_composite_layer(capsys, tmp_path):
    arch = _join_arch()
    params = initialization.init_network(arch, 9)
    ckpt = tmp_path / "j.ckpt"
    checkpoint.save_checkpoint(ckpt, arch, params)
    code, _, err = run_cli(
        capsys, "filters-export", "--ckpt", str(ckpt), "--layer", "2",
        "--out", str(tmp_path / "x.csv"),
    )
    assert code == 1
    assert "not a composite" in err


def test_eval_on_corrupt_checkpoint_errors(capsys, tmp_path, synth_cifar_dir):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOPE" + b"\x00" * 64)
    code, _, err = run_cli(capsys, "eval", "--ckpt", str(bad), "--data",
                           synth_cifar_dir)
    assert code == 1
    assert "magic" in err
