"""Command-line entry point: train, eval, transfer, trace, classify, sweep.

Exit codes: 0 ok, 1 internal failure, 2 input error, 3 architecture error.
Every failure prints exactly one ``error: ...`` line on stderr.  All outputs
land under the --out directory (default from $CUBENN_OUT, else ./out).  A
TOML file passed with --config supplies defaults for any flag, per-command
sections keyed by the command name.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .data import Dataset, SplitConfig, pair, read_hsc, read_hsg, scale, stratified_split
from .errors import (CheckpointError, CubennError, DatasetError,
                     InvalidArchitectureError, InvalidGeometryError)
from .netspec import (REFERENCE_PARAM_COUNTS, Network, NetworkSpec, param_count,
                      parse_spec, registry, shape_trace, validate)
from .tensor import Prng
from .train import (TrainConfig, averaged_runs, classify_map, evaluate,
                    loss_step_means, write_curves_csv, write_map_legend,
                    write_pgm, write_report_json)
from .transfer import fine_tune, read_checkpoint, save, write_checkpoint

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_ARCHITECTURE = 3


def _load_toml(path: str) -> dict:
    try:
        import tomllib  # py >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubenn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cubenn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", default=None, help="output directory (default $CUBENN_OUT or ./out)")
        p.add_argument("--config", default=None, help="TOML file providing flag defaults")

    def add_arch(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--family", choices=["a", "b", "c", "d", "e"], default="d")
        g.add_argument("--spec-file", default=None, help="custom architecture file")
        p.add_argument("--spatial", type=int, default=5, help="spatial neighborhood n (odd)")

    def add_data(p):
        p.add_argument("--cube", required=True, help=".hsc cube file")
        p.add_argument("--gt", required=True, help=".hsg ground-truth file")
        p.add_argument("--scale", choices=["raw", "global-max"], default="global-max")

    def add_train_knobs(p):
        p.add_argument("--split", default="frac:0.05", help="count:<k> or frac:<p>")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--epochs", type=int, default=30)
        p.add_argument("--batch-size", type=int, default=3, help="training batch size S")
        p.add_argument("--eval-batch", type=int, default=200, help="evaluation batch size T")
        p.add_argument("--l1", type=float, default=1e-4, help="L1 weight penalty")
        p.add_argument("--runs", type=int, default=3, help="independent runs to average")

    p = sub.add_parser("train", help="train a network and write checkpoint/report/curves")
    add_data(p); add_arch(p); add_train_knobs(p); add_common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on labeled pixels")
    add_data(p)
    p.add_argument("--init-from", required=True, help="checkpoint file")
    p.add_argument("--split", default="all", help="all, count:<k> or frac:<p> (test side is used)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--eval-batch", type=int, default=200)
    add_common(p)

    p = sub.add_parser("transfer", help="fine-tune a checkpoint's head on a new dataset")
    add_data(p)
    p.add_argument("--init-from", required=True, help="source checkpoint")
    p.add_argument("--freeze-features", action=argparse.BooleanOptionalAction, default=True,
                   help="keep convolution weights constant (default on)")
    p.add_argument("--split", default="frac:0.05")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=3)
    p.add_argument("--eval-batch", type=int, default=200)
    p.add_argument("--l1", type=float, default=1e-4)
    add_common(p)

    p = sub.add_parser("trace", help="print per-layer shapes and the parameter count")
    add_arch(p)
    p.add_argument("--bands", type=int, default=103)
    p.add_argument("--classes", type=int, default=9)
    add_common(p)

    p = sub.add_parser("classify", help="classify every pixel of a cube into a PGM map")
    p.add_argument("--cube", required=True)
    p.add_argument("--gt", default=None, help="optional, for class names in the legend")
    p.add_argument("--scale", choices=["raw", "global-max"], default="global-max")
    p.add_argument("--init-from", required=True)
    p.add_argument("--eval-batch", type=int, default=200)
    add_common(p)

    p = sub.add_parser("sweep", help="accuracy versus training fraction")
    add_data(p); add_arch(p)
    p.add_argument("--fractions", default="0.05,0.06,0.07,0.08,0.09",
                   help="comma-separated training fractions")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=3)
    p.add_argument("--eval-batch", type=int, default=200)
    p.add_argument("--l1", type=float, default=1e-4)
    p.add_argument("--runs", type=int, default=3)
    add_common(p)
    return parser


def _apply_config(args: argparse.Namespace) -> None:
    """Fill flags still at their parser defaults from the TOML config.

    Explicit command-line values always win: a config entry only lands when
    the parsed value still equals the parser's declared default.
    """
    if not getattr(args, "config", None):
        return
    table = _load_toml(args.config)
    section = table.get(args.command, {})
    defaults = _defaults_for(args.command)
    for key, value in section.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) == defaults.get(attr):
            setattr(args, attr, value)


def _defaults_for(command: str) -> dict:
    parser = _build_parser()
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return {action.dest: action.default for action in sub.choices[command]._actions}


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("CUBENN_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_spec(args, f: int, nclass: int) -> NetworkSpec:
    if getattr(args, "spec_file", None):
        text = Path(args.spec_file).read_text(encoding="utf-8")
        return parse_spec(text, n=args.spatial, f=f, nclass=nclass)
    return registry(args.family, args.spatial, f, nclass)


def _load_dataset(args) -> Dataset:
    cube = scale(read_hsc(args.cube), args.scale)
    gt = read_hsg(args.gt)
    return pair(cube, gt)


def _print_trace(spec: NetworkSpec) -> None:
    shapes = shape_trace(spec)
    warnings = validate(spec)
    print(f"family={spec.family} n={spec.n} f={spec.f} nclass={spec.nclass}")
    print(f"{'layer':<10}{'filters':<9}{'kernel':<10}{'stride':<9}{'pad':<9}{'out shape':<18}")
    for layer, shape in zip(spec.layers, shapes):
        if layer.kind == "fc":
            geom = ("", "", "")
            out = f"[{shape[0]}]"
        else:
            geom = ("x".join(map(str, layer.kernel)),
                    "x".join(map(str, layer.stride)),
                    "x".join(map(str, layer.pad)))
            out = "x".join(map(str, shape))
        print(f"{layer.kind:<10}{layer.filters:<9}{geom[0]:<10}{geom[1]:<9}{geom[2]:<9}{out:<18}")
    for w in warnings:
        print(f"note: {w}")
    total = param_count(spec)
    ref = REFERENCE_PARAM_COUNTS.get((spec.family, spec.n, spec.f, spec.nclass))
    if ref is not None:
        print(f"reference params: {ref} (delta {total - ref:+d})")
    print(f"params: {total}")


def _cfg_from(args) -> TrainConfig:
    return TrainConfig(
        S=args.batch_size, T=args.eval_batch, max_epoch=args.epochs,
        seed=args.seed, l1_lambda=args.l1, runs=getattr(args, "runs", 1),
    )


def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    spec = _resolve_spec(args, dataset.cube.bands, dataset.gt.nclass)
    split_cfg = SplitConfig.parse(args.split, seed=args.seed)
    cfg = _cfg_from(args)
    out = _out_dir(args)

    probe_split = stratified_split(dataset.gt, split_cfg, Prng(split_cfg.seed).derive(100))
    print(f"train={len(probe_split.train)} test={len(probe_split.test)}")

    summary = averaged_runs(spec, dataset, split_cfg, cfg)
    for i, report in enumerate(summary.reports):
        write_report_json(out / f"report_run{i}.json", report)
        write_curves_csv(out / f"loss_run{i}.csv", out / f"accuracy_run{i}.csv", report)
        step = loss_step_means(report)
        if step is not None:
            print(f"run{i}: accuracy={report.final_accuracy:.4f} "
                  f"early=({report.early_iteration}, {report.early_accuracy:.4f}) "
                  f"loss-step pre={step[0]:.4f} post={step[1]:.4f}")
        else:
            print(f"run{i}: accuracy={report.final_accuracy:.4f} "
                  f"early=({report.early_iteration}, {report.early_accuracy:.4f})")

    write_checkpoint(out / "checkpoint.ckpt",
                     save(summary.networks[0], meta={"seed": cfg.seed, "command": "train"}))
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump({
            "mean_accuracy": summary.mean_accuracy,
            "accuracies": summary.accuracies,
            "max_deviation": summary.max_deviation,
            "deviation_flagged": summary.deviation_flagged,
        }, fh, sort_keys=True)
        fh.write("\n")
    print(f"mean accuracy: {summary.mean_accuracy:.4f} "
          f"(max deviation {summary.max_deviation:.4f})")
    return EXIT_OK


def cmd_eval(args) -> int:
    dataset = _load_dataset(args)
    net = _net_from_checkpoint(args.init_from, dataset)
    if args.split == "all":
        coords = dataset.gt.labeled_coords()
    else:
        split_cfg = SplitConfig.parse(args.split, seed=args.seed)
        coords = stratified_split(dataset.gt, split_cfg,
                                  Prng(split_cfg.seed).derive(100)).test
    acc, cm = evaluate(net, dataset, coords, args.eval_batch)
    out = _out_dir(args)
    with open(out / "eval.json", "w", encoding="utf-8") as fh:
        json.dump({"accuracy": acc, "confusion": cm.to_lists()}, fh, sort_keys=True)
        fh.write("\n")
    print(f"accuracy: {acc:.4f} over {cm.total()} pixels")
    return EXIT_OK


def _net_from_checkpoint(path, dataset: Dataset | None = None) -> Network:
    from .transfer import load
    ckpt = read_checkpoint(path)
    net = load(ckpt)
    if dataset is not None:
        if net.spec.f != dataset.cube.bands:
            raise DatasetError(
                f"checkpoint expects {net.spec.f} bands, cube has {dataset.cube.bands}")
        if dataset.gt is not None and net.spec.nclass != dataset.gt.nclass:
            raise DatasetError(
                f"checkpoint expects {net.spec.nclass} classes, ground truth has {dataset.gt.nclass}")
    return net


def cmd_transfer(args) -> int:
    dataset = _load_dataset(args)
    ckpt = read_checkpoint(args.init_from)
    split_cfg = SplitConfig.parse(args.split, seed=args.seed)
    split = stratified_split(dataset.gt, split_cfg, Prng(split_cfg.seed).derive(100))
    cfg = TrainConfig(S=args.batch_size, T=args.eval_batch, max_epoch=args.epochs,
                      seed=args.seed, l1_lambda=args.l1, runs=1)
    net, report = fine_tune(ckpt, dataset, split, cfg, freeze=args.freeze_features)
    out = _out_dir(args)
    write_report_json(out / "report.json", report)
    write_curves_csv(out / "loss.csv", out / "accuracy.csv", report)
    write_checkpoint(out / "checkpoint.ckpt",
                     save(net, meta={"seed": args.seed, "command": "transfer",
                                     "source": str(args.init_from)}))
    print(f"train={len(split.train)} test={len(split.test)}")
    print(f"accuracy: {report.final_accuracy:.4f}")
    return EXIT_OK


def cmd_trace(args) -> int:
    spec = _resolve_spec(args, args.bands, args.classes)
    _print_trace(spec)
    return EXIT_OK


def cmd_classify(args) -> int:
    cube = scale(read_hsc(args.cube), args.scale)
    gt = read_hsg(args.gt) if args.gt else None
    net = _net_from_checkpoint(args.init_from)
    if net.spec.f != cube.bands:
        raise DatasetError(f"checkpoint expects {net.spec.f} bands, cube has {cube.bands}")
    label_img = classify_map(net, cube, args.eval_batch)
    out = _out_dir(args)
    write_pgm(out / "map.pgm", label_img)
    if gt is not None:
        write_map_legend(out / "map_legend.json", gt=gt)
    else:
        write_map_legend(out / "map_legend.json", nclass=net.spec.nclass)
    print(f"map: {out / 'map.pgm'} ({cube.width}x{cube.height})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    dataset = _load_dataset(args)
    spec = _resolve_spec(args, dataset.cube.bands, dataset.gt.nclass)
    fractions = [float(tok) for tok in args.fractions.split(",") if tok.strip()]
    if not fractions:
        raise DatasetError("no fractions given")
    cfg = _cfg_from(args)
    out = _out_dir(args)
    rows = []
    for frac in fractions:
        split_cfg = SplitConfig(mode="frac", p=frac, seed=args.seed)
        summary = averaged_runs(spec, dataset, split_cfg, cfg)
        rows.append((frac, summary.mean_accuracy, summary.max_deviation))
        print(f"fraction={frac:.3f} mean_accuracy={summary.mean_accuracy:.4f} "
              f"deviation={summary.max_deviation:.4f}")
    with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("fraction,mean_accuracy,deviation\n")
        for frac, acc, dev in rows:
            fh.write(f"{frac},{acc},{dev}\n")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "trace": cmd_trace,
    "classify": cmd_classify,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return _COMMANDS[args.command](args)
    except (InvalidArchitectureError, InvalidGeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARCHITECTURE
    except (DatasetError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CubennError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - single-line contract for scripts
        print(f"error: internal: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
