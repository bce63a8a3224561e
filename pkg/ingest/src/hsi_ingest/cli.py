"""ingest command line: convert MAT scenes, verify converted pairs."""

from __future__ import annotations

import argparse
import sys

from .convert import ConversionError, convert
from .descriptors import DATASETS
from .formats import FormatError
from .verify import VerificationError, verify


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ingest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="MAT cube + MAT ground truth -> <prefix>.hsc/.hsg")
    p.add_argument("cube_mat")
    p.add_argument("gt_mat")
    p.add_argument("-o", "--out-prefix", required=True)
    p.add_argument("--dataset", choices=sorted(DATASETS),
                   help="pin a known scene (default: auto-detect by geometry)")

    p = sub.add_parser("verify", help="check a converted <prefix>.hsc/.hsg pair")
    p.add_argument("prefix")
    p.add_argument("--dataset", choices=sorted(DATASETS),
                   help="also require this scene's exact geometry")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            descriptor = DATASETS[args.dataset] if args.dataset else None
            summary = convert(args.cube_mat, args.gt_mat, args.out_prefix, descriptor)
            header = summary["cube"]
            print(f"wrote {args.out_prefix}.hsc "
                  f"({header['width']}x{header['height']}x{header['bands']})")
            print(f"wrote {args.out_prefix}.hsg "
                  f"(nclass={summary['gt']['nclass']}, labeled={summary['labeled_pixels']})")
            if summary["dataset"]:
                print(f"detected dataset: {summary['dataset']}")
        else:
            descriptor = DATASETS[args.dataset] if args.dataset else None
            report = verify(args.prefix, descriptor)
            print(f"{args.prefix}: {report['width']}x{report['height']}x{report['bands']}, "
                  f"{report['nclass']} classes, {report['unlabeled']} unlabeled")
            width = max(len(n) for n in report["histogram"])
            for name, count in report["histogram"].items():
                print(f"  {name:<{width}}  {count}")
            print("ok")
        return 0
    except (ConversionError, VerificationError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
