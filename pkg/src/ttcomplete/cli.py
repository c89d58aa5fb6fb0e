"""Command-line entry point: ``ttc {complete,synth-bench,augment-inspect,metrics}``.

Failures print one line ``error: <code>: <message>`` to stderr and exit 2.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .augment import make_plan
from .completion import CompletionConfig
from .errors import InvalidArgument, TTCError
from .experiments import ExperimentConfig, load_config_file, run_experiment, run_synth_bench
from .imageio import input_kind, load_tensor
from .metrics import score
from .tensor import write_dt1

log = logging.getLogger("ttcomplete")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArgument(message)


def _dims(text):
    try:
        return tuple(int(v) for v in text.replace("x", ",").split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--seed", type=int)
    g.add_argument("--ranks", type=_dims, help="per-mode ranks, or one rank for all modes")
    g.add_argument("--r-max", type=int, dest="r_max")
    g.add_argument("--c", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--lambda-u", type=float, dest="lambda_u")
    g.add_argument("--lambda-v", type=float, dest="lambda_v")
    g.add_argument("--th", type=float)
    g.add_argument("--max-iters", type=int, dest="max_iters")
    g.add_argument("--workers", type=int, help="parallel mode workers (default: TTC_WORKERS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ttc", description="Tensor-train completion with weighted factorization.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("complete", help="complete one image or tensor")
    p.add_argument("input", nargs="?", help="PGM, PPM or DT1 file")
    p.add_argument("--config", help="key = value experiment file; flags override it")
    p.add_argument("--kind", choices=("pgm", "ppm", "dt1"))
    p.add_argument("--mask", help="DM1 mask (1 = observed); sampled when absent")
    p.add_argument("--missing-rate", type=float, dest="missing_rate")
    p.add_argument("--augment", choices=("none", "reshape", "ka", "oka"))
    p.add_argument("--scheme", choices=("tmac-tt", "twmac-tt"))
    p.add_argument("--reshape-dims", type=_dims, dest="reshape_dims")
    p.add_argument("--dataset")
    p.add_argument("--estimate", help="output path (.pgm/.ppm/.dt1)")
    p.add_argument("--metrics-csv", dest="metrics_csv")
    p.add_argument("--trace-csv", dest="trace_csv")
    p.add_argument("--diagnostics-csv", dest="diagnostics_csv")
    p.add_argument("--mode-errors-csv", dest="mode_errors_csv")
    p.add_argument("--unknown-truth", action="store_true", default=None, dest="unknown_truth",
                   help="treat the input as incomplete data; no metrics are reported")
    p.add_argument("--no-figures", action="store_false", default=None, dest="figures")
    _solver_flags(p)

    p = sub.add_parser("synth-bench", help="synthetic low-rank sweep over missing rates and schemes")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--extent", type=int, default=20)
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--missing-rates", type=_floats, default=(0.5,), dest="missing_rates")
    p.add_argument("--schemes", default="tmac-tt,twmac-tt")
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.add_argument("--no-figures", action="store_false", dest="figures")
    _solver_flags(p)

    p = sub.add_parser("augment-inspect", help="print the augmentation plan for given dims")
    p.add_argument("dims", type=_dims, nargs="?", help="e.g. 256,256,3 (or taken from --input)")
    p.add_argument("--input", help="image or DT1 tensor to augment")
    p.add_argument("--kind", choices=("pgm", "ppm", "dt1"))
    p.add_argument("--out", help="write the augmented tensor here (DT1)")
    p.add_argument("--augment", default="oka", choices=("none", "reshape", "ka", "oka"))
    p.add_argument("--reshape-dims", type=_dims, dest="reshape_dims")

    p = sub.add_parser("metrics", help="score an estimate against a reference")
    p.add_argument("estimate")
    p.add_argument("truth")
    p.add_argument("--kind", choices=("pgm", "ppm", "dt1"))
    return parser


_SOLVER_KEYS = ("seed", "ranks", "r_max", "c", "gamma", "lambda_u", "lambda_v", "th",
                "max_iters", "workers")


def _overrides(args, keys):
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _cmd_complete(args):
    values = load_config_file(args.config) if args.config else {}
    if args.input:
        values["input"] = args.input
    keys = ("kind", "mask", "missing_rate", "augment", "scheme", "reshape_dims", "dataset",
            "estimate", "metrics_csv", "trace_csv", "diagnostics_csv", "mode_errors_csv",
            "unknown_truth", "figures") + _SOLVER_KEYS
    values.update(_overrides(args, keys))
    cfg = ExperimentConfig(**values)
    report = run_experiment(cfg)
    if report is None:
        print("completed (no ground truth, metrics skipped)")
    else:
        print(f"rse={report.rse:.6g} psnr={report.psnr:.4f} ssim={report.ssim:.4f}")


def _cmd_synth_bench(args):
    config = CompletionConfig(**_overrides(args, _SOLVER_KEYS))
    schemes = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    rows = run_synth_bench(args.order, args.extent, args.rank, args.missing_rates, schemes,
                           seed=config.seed, out_csv=args.out, config=config,
                           figures=args.figures)
    for r in rows:
        print(f"{r['missing_rate']:.2f} {r['scheme']:<9} rse={r['rse']:.4e} iters={r['iters']}")


def _cmd_augment_inspect(args):
    data = load_tensor(args.input, input_kind(args.input, args.kind)) if args.input else None
    dims = args.dims if args.dims else (data.shape if data is not None else None)
    if dims is None:
        raise InvalidArgument("give dims or --input")
    if data is not None and tuple(dims) != data.shape:
        raise InvalidArgument(f"dims {tuple(dims)} differ from input dims {data.shape}")
    if args.out and data is None:
        raise InvalidArgument("--out needs --input")
    plan = make_plan(args.augment, dims, args.reshape_dims)
    print(f"{'scheme':<12} {plan.scheme}")
    print(f"{'input dims':<12} {tuple(plan.input_dims)}")
    print(f"{'output dims':<12} {tuple(plan.output_dims)}")
    print(f"{'order':<12} {len(plan.output_dims)}")
    if hasattr(plan, "sizes"):
        print(f"{'levels':<12} {plan.levels}")
        print(f"{'level':>5} {'size':>9} {'start':>9} {'overlap':>9}")
        overlaps = [None] + plan.overlaps()
        for level, (size, start, ov) in enumerate(zip(plan.sizes, plan.starts, overlaps)):
            ov_txt = "-" if ov is None else f"{ov[0]},{ov[1]}"
            print(f"{level:>5} {size[0]:>4}x{size[1]:<4} {start[0]:>4},{start[1]:<4} {ov_txt:>9}")
    if args.out:
        write_dt1(plan.apply(data), args.out)


def _cmd_metrics(args):
    est = load_tensor(args.estimate, input_kind(args.estimate, args.kind))
    truth = load_tensor(args.truth, input_kind(args.truth, args.kind))
    if est.shape != truth.shape:
        raise InvalidArgument(f"dims differ: {est.shape} vs {truth.shape}")
    rep = score(np.asarray(est), np.asarray(truth))
    print(f"rse={rep.rse:.6g} psnr={rep.psnr:.4f} ssim={rep.ssim:.4f}")


_COMMANDS = {
    "complete": _cmd_complete,
    "synth-bench": _cmd_synth_bench,
    "augment-inspect": _cmd_augment_inspect,
    "metrics": _cmd_metrics,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        _COMMANDS[args.command](args)
    except TTCError as exc:
        print(f"error: {exc.code}: {_one_line(exc)}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {_one_line(exc)}", file=sys.stderr)
        return 2
    return 0


def _one_line(exc):
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
