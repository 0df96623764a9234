"""Command-line front end: run Monte-Carlo sweeps, summarize result files
and query bound traces.

Exit codes: 0 success, 1 configuration error, 2 runtime/numerical error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .channel import (SystemDims, gen_sparse_channel, make_training,
                      round_half_up, snr_to_noise_var)
from .crlb import crlb_lse, crlb_lse_smp, nmse_bound_db
from .harness import (BOUND_SEED_TAG, ConfigError, ExperimentConfig,
                      emit_csv, emit_gnuplot, load_config, preset_config,
                      read_csv, run_experiment, summarize)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chanest",
        description="Sparse beamspace channel estimation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte-Carlo sweep")
    run.add_argument("--config", help="flat key=value configuration file")
    run.add_argument("--preset", choices=("fig4", "fig5", "fig6"),
                     help="start from a shipped experiment setup")
    run.add_argument("--out", default="results.csv", help="output CSV path")
    run.add_argument("--workers", type=int, default=1,
                     help="worker processes (results are worker-independent)")
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--gnuplot", help="also write a gnuplot script here")
    run.add_argument("--quiet", action="store_true",
                     help="skip the text summary")

    summ = sub.add_parser("summarize", help="summarize a results CSV")
    summ.add_argument("csv", help="results file written by 'chanest run'")

    bound = sub.add_parser("bound", help="print bound traces for one setup")
    bound.add_argument("--eta", type=float, required=True,
                       help="sparsity ratio in (0, 1]")
    bound.add_argument("--snr", type=float, required=True, help="SNR in dB")
    bound.add_argument("--nr", type=int, default=32)
    bound.add_argument("--nt", type=int, default=64)
    bound.add_argument("--t-blocks", type=int, default=None,
                       help="training length (default: nt)")
    bound.add_argument("--value-var", type=float, default=10.0)
    bound.add_argument("--training-kind", default="orthogonal",
                       choices=("orthogonal", "random-sign", "gaussian"))
    bound.add_argument("--samples", type=int, default=8,
                       help="support draws averaged for the sparse bound")
    return parser


def _cmd_run(args) -> int:
    config = preset_config(args.preset) if args.preset else ExperimentConfig()
    if args.config:
        config = load_config(args.config, config)
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    config.validate()
    records = run_experiment(config, workers=max(1, args.workers))
    emit_csv(records, args.out)
    if args.gnuplot:
        emit_gnuplot(records, args.out, args.gnuplot)
    if not args.quiet:
        print(summarize(records), end="")
    print(f"wrote {args.out}")
    return 0


def _cmd_summarize(args) -> int:
    records = read_csv(args.csv)
    print(summarize(records), end="")
    return 0


def _cmd_bound(args) -> int:
    t_blocks = args.t_blocks if args.t_blocks is not None else args.nt
    try:
        dims = SystemDims(args.nr, args.nt, t_blocks)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not 0.0 < args.eta <= 1.0:
        raise ConfigError("eta: must lie in (0, 1]")
    n_nonzero = round_half_up(args.eta * dims.size)
    if n_nonzero < 1:
        raise ConfigError("eta: yields an empty support")
    training = make_training(dims, args.training_kind)
    noise_var = snr_to_noise_var(training, dims, args.snr)

    _, lse_trace = crlb_lse(training, noise_var, dims)
    total = 0.0
    for r in range(max(1, args.samples)):
        rng = np.random.default_rng(np.random.SeedSequence([0, r, BOUND_SEED_TAG]))
        ch = gen_sparse_channel(dims, args.eta, 1.0, rng)
        _, tr = crlb_lse_smp(training, ch.support, noise_var)
        total += tr
    smp_trace = total / max(1, args.samples)

    print(f"system {dims.n_r}x{dims.n_t}, t_blocks={dims.t_blocks}, "
          f"eta={args.eta:g} (L={n_nonzero}), snr={args.snr:g} dB, "
          f"noise_var={noise_var:.6g}")
    print(f"crlb_lse      trace={lse_trace:.6g}  "
          f"nmse={nmse_bound_db(lse_trace, n_nonzero, args.value_var):.2f} dB")
    print(f"crlb_lse_smp  trace={smp_trace:.6g}  "
          f"nmse={nmse_bound_db(smp_trace, n_nonzero, args.value_var):.2f} dB")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        return _cmd_bound(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # numerical / runtime failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
