"""Command line entry point: ``oensc run | grid | synth``.

Exit codes: 0 success, 1 solver or support-point failure, 2 config/IO failure.
"""

import argparse
import logging
import os
import sys

from . import data as dio
from . import harness
from .errors import ConfigError, OenscError, ParseError

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_run_options(p):
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--data", help="comma-delimited p x n matrix (labels in <data>.labels)")
    p.add_argument("--synthetic", help="synthetic data description file")
    p.add_argument("--algorithm", choices=harness.ALGORITHMS)
    p.add_argument("--m", type=int, help="number of dictionary atoms (default 10 per class)")
    p.add_argument("--mm", type=int, help="outliers between dictionary rebuilds")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--delta", type=float, help="outlier radius")
    g.add_argument("--delta-quantile", type=float, help="calibrate the outlier radius on the initial batch")
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--sigma", type=float, help="ADMM penalty (default 2 ||D^T D + lambda2 I||)")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--init-batch-size", type=int)
    p.add_argument("--n-clusters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--eval-from", type=int, help="also score the samples from this stream index on")
    p.add_argument("--label-every", type=int, help="cluster a snapshot every N samples")
    p.add_argument("--out", help="output directory")


def _overrides(args, *extra):
    keys = ("data", "synthetic", "algorithm", "m", "mm", "delta", "delta_quantile", "lambda1", "lambda2",
            "sigma", "tol", "max_iter", "init_batch_size", "n_clusters", "seed", "eval_from",
            "label_every", "out") + extra
    return {k: getattr(args, k, None) for k in keys}


def build_parser():
    parser = argparse.ArgumentParser(prog="oensc", description="Online l0 elastic net subspace clustering")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="cluster one stream")
    _add_run_options(run)
    run.add_argument("--trace", action="store_true", default=None, help="write per-iteration solver traces")
    run.add_argument("--repeats", type=int, default=1, help="repeat over consecutive seeds")

    grid = sub.add_parser("grid", help="grid search over lambda1 x lambda2")
    _add_run_options(grid)
    grid.add_argument("--lambda1-grid", type=_floats, default=list(harness.DEFAULT_LAMBDA1_GRID))
    grid.add_argument("--lambda2-grid", type=_floats, default=list(harness.DEFAULT_LAMBDA2_GRID))
    grid.add_argument("--coordinate", action="store_true", help="sweep one parameter at a time")

    synth = sub.add_parser("synth", help="generate a synthetic union-of-subspaces matrix")
    synth.add_argument("--spec", required=True)
    synth.add_argument("--out", required=True, help="matrix path; labels go to <out>.labels")
    return parser


def _summary_line(report):
    met = report.metrics or {}
    parts = [f"n={report.n_samples}", f"m={report.m}", f"dict_version={report.dict_version}"]
    parts += [f"{k}={met[k]:.4f}" for k in ("acc", "nmi", "purity") if k in met]
    parts.append(f"seconds={report.seconds:.2f}")
    return " ".join(parts)


def _cmd_run(args):
    cfg = harness.load_config(args.config, **_overrides(args), trace=args.trace)
    if args.repeats > 1:
        rows, summary = harness.repeat_runs(cfg, args.repeats)
        if cfg.out:
            os.makedirs(cfg.out, exist_ok=True)
            harness.write_repeat_table(os.path.join(cfg.out, "repeats.csv"), rows, summary)
        for key, (mean, std) in summary.items():
            print(f"{key}: mean={mean:.4f} std={std:.4f}")
        return EXIT_OK
    report = harness.run_stream(cfg)
    print(_summary_line(report))
    return EXIT_OK


def _cmd_grid(args):
    cfg = harness.load_config(args.config, **_overrides(args))
    best, table = harness.grid_search(cfg, args.lambda1_grid, args.lambda2_grid, coordinate=args.coordinate)
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        harness.write_grid_table(os.path.join(cfg.out, "grid.csv"), table)
    print(",".join(harness.GRID_COLUMNS))
    for row in table:
        print(",".join(str(row[k]) for k in harness.GRID_COLUMNS))
    print(f"best lambda1={best.lambda1} lambda2={best.lambda2}")
    return EXIT_OK


def _cmd_synth(args):
    ds = harness.load_synthetic_spec(args.spec)
    parent = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(parent, exist_ok=True)
    dio.save_matrix(args.out, ds.Z, ds.truth)
    print(f"wrote {ds.p} x {ds.n} matrix with {ds.n_classes} classes to {args.out}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "grid": _cmd_grid, "synth": _cmd_synth}[args.command]
    try:
        return handler(args)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OenscError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
