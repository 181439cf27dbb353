"""Command-line interface.

Subcommands: models list | analyze | grad-check | init-probe | train |
eval | filters-export.  Every command is deterministic given its flags and
writes machine-readable CSV to stdout; errors exit nonzero with a single
diagnostic line on stderr.
"""

import argparse
import sys

import numpy as np

from . import archfile, checkpoint, costmodel, gradcheck, initialization
from . import network, trainer, zoo
from .data import ZcaTransform, load_cifar10
from .errors import LowRankCnnError


def _parse_input_shape(text):
    parts = text.split("x")
    if len(parts) != 3 or not all(p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(
            f"--input must be CxHxW with lowercase x, got {text!r}"
        )
    return tuple(int(p) for p in parts)


def _cmd_models(args):
    if args.action == "list":
        for name in sorted(zoo.MODEL_NAMES):
            print(name)
    return 0


def _print_report(report):
    print(f"# model: {report.arch_name}")
    sys.stdout.write(costmodel.report_csv(report))


def _savings_line(base_name, base, report):
    s = costmodel.compare(base, report)
    print(
        f"# savings of {report.arch_name} vs {base_name}: "
        f"macs={s.mac_savings_fraction:.4f} params={s.param_savings_fraction:.4f}"
    )


def _cmd_analyze(args):
    arch = archfile.resolve_model(args.model)
    report = costmodel.analyze(arch, args.input)
    _print_report(report)
    reports = [report]
    compared_to = None
    if args.compare:
        other = costmodel.analyze(archfile.resolve_model(args.compare), args.input)
        print()
        _print_report(other)
        _savings_line(other.arch_name, other, report)
        compared_to = other.arch_name
        reports.append(other)
    # standing baselines, whenever the input geometry admits them
    for base_name in ("vgg11", "vgg-gmp"):
        if base_name == compared_to:
            continue
        try:
            base = costmodel.analyze(zoo.build(base_name), args.input)
        except LowRankCnnError:
            continue
        for rep in reports:
            if rep.arch_name != base_name:
                _savings_line(base_name, base, rep)
    return 0


def _cmd_grad_check(args):
    rows = gradcheck.run_suite(seed=args.seed)
    print("op,cases,max_rel_err")
    worst = 0.0
    for row in rows:
        print(f"{row.op},{row.cases},{row.max_rel_err!r}")
        worst = max(worst, row.max_rel_err)
    print(f"total,,{worst!r}")
    return 0 if worst < gradcheck.TOLERANCE else 1


def _cmd_init_probe(args):
    arch = archfile.resolve_model(args.model)
    rows = initialization.variance_probe(arch, trials=args.trials, seed=args.seed)
    sys.stdout.write(initialization.probe_csv(rows))
    return 0


def _load_data_dir(directory):
    return load_cifar10(directory)


def _cmd_train(args):
    with open(args.config, "r", encoding="utf-8") as f:
        config = trainer.parse_train_config(f.read())
    arch = archfile.resolve_model(args.model)
    (train_x, train_y), (test_x, test_y) = _load_data_dir(args.data)
    result = trainer.train(arch, (train_x, train_y), config,
                           val_data=(test_x, test_y))
    extra = {}
    if result.zca is not None:
        extra = {
            "zca.mean": result.zca.mean,
            "zca.matrix": result.zca.matrix,
            "zca.inverse": result.zca.inverse,
            "zca.epsilon": np.array([result.zca.epsilon]),
        }
    checkpoint.save_checkpoint(args.out, arch, result.params, extra)
    history_path = args.out + ".history.csv"
    with open(history_path, "w", encoding="utf-8") as f:
        f.write(result.history.csv())
    print(f"# checkpoint: {args.out}")
    print(f"# history: {history_path}")
    print("epoch,train_acc,val_acc")
    for epoch, tr, va in result.history.epochs:
        print(f"{epoch},{tr!r},{'' if va is None else repr(va)}")
    return 0


def _zca_from_extra(extra):
    if "zca.mean" not in extra:
        return None
    return ZcaTransform(
        extra["zca.mean"], extra["zca.matrix"], extra["zca.inverse"],
        float(extra["zca.epsilon"][0]),
    )


def _cmd_eval(args):
    arch, params, extra = checkpoint.load_checkpoint(args.ckpt)
    _, (test_x, test_y) = _load_data_dir(args.data)
    metrics = trainer.evaluate(arch, params, (test_x, test_y),
                               transform=_zca_from_extra(extra))
    print("metric,value")
    for key in sorted(metrics):
        print(f"{key},{metrics[key]!r}")
    return 0


def _cmd_filters_export(args):
    from . import composite as compmod

    arch, params, _ = checkpoint.load_checkpoint(args.ckpt)
    if not 0 <= args.layer < len(arch.layers):
        raise LowRankCnnError(
            f"layer index {args.layer} out of range 0..{len(arch.layers) - 1}"
        )
    layer = arch.layers[args.layer]
    if not isinstance(layer, zoo.CompositeConv):
        raise LowRankCnnError(f"layer {args.layer} is not a composite layer")
    cp = network.as_composite_params(layer.spec, params[args.layer])
    kernels = compmod.effective_filters(layer.spec, cp)
    text = compmod.filters_csv(kernels)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(text)
    print(f"# wrote {kernels.shape[0]}x{kernels.shape[1]} kernels to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lowrankcnn",
        description="Low-rank composite CNN toolkit: analyze, train, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("models", help="model zoo queries")
    p.add_argument("action", choices=["list"])
    p.set_defaults(fn=_cmd_models)

    p = sub.add_parser("analyze", help="MAC/parameter cost report")
    p.add_argument("--model", required=True)
    p.add_argument("--input", type=_parse_input_shape, default=(3, 224, 224))
    p.add_argument("--compare", default=None)
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("grad-check", help="finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_grad_check)

    p = sub.add_parser("init-probe", help="backward variance ratio probe")
    p.add_argument("--model", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(fn=_cmd_init_probe)

    p = sub.add_parser("train", help="train a model on CIFAR-10 binaries")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("filters-export", help="export effective filters as CSV")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_filters_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (LowRankCnnError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
