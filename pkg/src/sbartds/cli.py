"""Command-line interface.

Exit codes: 0 success, 2 configuration or data error, 3 numerical error
raised by the sampler.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateStateError,
    DivergingRejectionError,
    SingularDesignError,
)
from .run import load_config, run_from_config, write_default_config
from .simulate import DunsonDesign, gen_dunson

PROBIT_NOTE = (
    "note: the probit link is the default but its acceptance function has an "
    "unbounded density/cdf ratio, so the posterior contraction guarantees "
    "hold only for the logit and t links."
)


def _cmd_init(args):
    write_default_config(args.out, force=args.force)
    print(f"wrote {args.out}")
    return 0


def _cmd_simulate(args):
    design = DunsonDesign(n=args.n, p=args.p, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    X, y = gen_dunson(rng, design)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(args.p)] + ["y"])
        for i in range(args.n):
            writer.writerow([repr(float(v)) for v in X[i]] + [repr(float(y[i]))])
    print(f"wrote {args.out}: n={args.n} p={args.p} seed={args.seed}")
    return 0


def _cmd_fit(args):
    config = load_config(args.config)
    if args.out is not None:
        config.out_dir = args.out
    if config.link == "probit":
        print(PROBIT_NOTE, file=sys.stderr)
    out_dir = run_from_config(config)
    print(f"fit complete: outputs in {out_dir}")
    return 0


def _read_table(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


def _cmd_summarize(args):
    summary_path = os.path.join(args.run, "density_summary.json")
    if not os.path.exists(summary_path):
        raise ConfigError(f"{args.run} does not look like a run directory")
    with open(summary_path) as fh:
        summary = json.load(fh)
    print(f"run directory: {args.run}")
    print(f"density grid: {len(summary['y_grid'])} points, "
          f"{len(summary['queries'])} query rows")
    for name in ("split_probs.csv", "base_coefficients.csv"):
        path = os.path.join(args.run, name)
        header, rows = _read_table(path)
        print(f"\n{name}")
        print("  " + "  ".join(f"{h:>12}" for h in header))
        for row in rows:
            cells = [row[0]] + [f"{float(v):.4f}" for v in row[1:]]
            print("  " + "  ".join(f"{c:>12}" for c in cells))
    return 0


def _split_rhat(series_by_chain):
    """Split-chain potential scale reduction factor."""
    halves = []
    for series in series_by_chain:
        mid = len(series) // 2
        if mid >= 2:
            halves.extend([series[:mid], series[mid : 2 * mid]])
    if len(halves) < 2:
        return float("nan")
    halves = np.array(halves, dtype=float)
    m, n = halves.shape
    means = halves.mean(axis=1)
    b = n * means.var(ddof=1)
    w = halves.var(axis=1, ddof=1).mean()
    if w <= 0:
        return float("nan")
    return float(np.sqrt(((n - 1) / n * w + b / n) / w))


def _cmd_diagnose(args):
    trace_path = os.path.join(args.run, "trace.csv")
    if not os.path.exists(trace_path):
        raise ConfigError(f"{args.run} does not look like a run directory")
    header, rows = _read_table(trace_path)
    cols = {h: i for i, h in enumerate(header)}
    chains = sorted({row[cols["chain"]] for row in rows})
    print(f"retained draws: {len(rows)} across {len(chains)} chain(s)")
    scalars = ["gamma", "sigma_mu", "rho", "a", "mean_depth", "sum_rejected"]
    print(f"{'scalar':>14} {'mean':>10} {'sd':>10} {'rhat':>8}")
    for name in scalars:
        by_chain = [
            np.array(
                [float(r[cols[name]]) for r in rows if r[cols["chain"]] == ch]
            )
            for ch in chains
        ]
        pooled = np.concatenate(by_chain)
        rhat = _split_rhat(by_chain)
        rhat_txt = f"{rhat:8.3f}" if np.isfinite(rhat) else "     n/a"
        print(f"{name:>14} {pooled.mean():10.4f} {pooled.std(ddof=1):10.4f} {rhat_txt}")
        if np.isfinite(rhat) and rhat > 1.05:
            print(f"{'':>14} warning: rhat above 1.05; chains may not have mixed")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sbartds",
        description="Conditional density estimation by soft-tree tilted base models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", help="write a commented default config file")
    p_init.add_argument("--out", default="config.toml")
    p_init.add_argument("--force", action="store_true")
    p_init.set_defaults(func=_cmd_init)

    p_sim = sub.add_parser("simulate", help="generate the benchmark mixture data")
    p_sim.add_argument("--n", type=int, default=500)
    p_sim.add_argument("--p", type=int, default=5)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default="data.csv")
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="run the sampler from a config file")
    p_fit.add_argument("--config", required=True)
    p_fit.add_argument("--out", default=None, help="override output directory")
    p_fit.add_argument("-v", "--verbose", action="store_true")
    p_fit.set_defaults(func=_cmd_fit)

    p_sum = sub.add_parser("summarize", help="print tables from a run directory")
    p_sum.add_argument("--run", required=True)
    p_sum.set_defaults(func=_cmd_summarize)

    p_diag = sub.add_parser("diagnose", help="trace statistics and mixing checks")
    p_diag.add_argument("--run", required=True)
    p_diag.set_defaults(func=_cmd_diagnose)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergingRejectionError, DegenerateStateError, SingularDesignError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
