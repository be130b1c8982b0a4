"""``streamqm`` command line: fit, eval and gen subcommands.

Exit codes: 0 success, 2 argument/configuration error, 3 format error,
4 numeric error, 1 anything else (I/O failures included).
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from . import datagen, qmf
from .errors import ArgumentError, StreamQMError
from .manifold import load_manifold, save_manifold
from .pipeline import DEFAULT_SWEEP, StreamConfig, evaluate, run_stream

log = logging.getLogger("streamqm")


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _add_wave_args(p, T_flags):
    p.add_argument("--grid", type=int, default=64, help="grid points per axis (default 64)")
    p.add_argument("--dt", type=float, default=None, help="time step (default 0.4 * dx)")
    p.add_argument(*T_flags, dest="T", type=float, default=8.0, help="final time (default 8)")
    p.add_argument("--sample-stride", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="streamqm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="stream snapshots through the incremental SVD and fit a manifold")
    fit.add_argument("--input", required=True, help="QMF1 file, directory, '-' for stdin, or gen:wave")
    fit.add_argument("--chunk-width", type=int, required=True)
    fit.add_argument("--rank", type=int, required=True, help="truncation dimension q")
    fit.add_argument("--reduced-dim", type=int, required=True, help="manifold dimension n")
    gam = fit.add_mutually_exclusive_group()
    gam.add_argument("--gamma", type=float)
    gam.add_argument("--gamma-sweep", type=_float_list)
    fit.add_argument("--checkpoint")
    fit.add_argument("--checkpoint-every", type=int, default=0)
    fit.add_argument("--rebuild-every", type=int, default=0)
    fit.add_argument("--linear", action="store_true", help="linear baseline: leading n vectors, W = 0")
    fit.add_argument("--discard-v", action="store_true", help="keep only U and sigma (no manifold)")
    fit.add_argument("--reuse-selection", action="store_true",
                     help="select once at the smallest gamma and refit W only across the sweep")
    fit.add_argument("--validation", help="QMF1 validation matrix (file sources)")
    fit.add_argument("--test", help="QMF1 test matrix (file sources)")
    fit.add_argument("--max-chunks", type=int, help="stop after this many chunks (checkpoint and exit)")
    fit.add_argument("--reproducible", action="store_true", help="write wall_seconds as 0 in the report")
    fit.add_argument("--output", help="manifold file (.qman)")
    fit.add_argument("--report", help="report JSON path")
    fit.add_argument("--mu-list", type=_float_list, help="training parameters for gen:wave")
    _add_wave_args(fit, ("--T", "--final-time"))

    ev = sub.add_parser("eval", help="relative error of a manifold on a test matrix")
    ev.add_argument("--manifold", required=True)
    ev.add_argument("--test", required=True)

    gen = sub.add_parser("gen", help="generate snapshot data")
    gen_sub = gen.add_subparsers(dest="generator", required=True)
    wave = gen_sub.add_parser("wave", help="2D acoustic wave trajectories")
    _add_wave_args(wave, ("--T", "--final-time"))
    wave.add_argument("--mu-list", type=_float_list, required=True)
    wave.add_argument("--dump", required=True, help="output directory, one QMF1 file per parameter")
    wave.add_argument("--chunk-width", type=int, default=0, help="block width (default: whole trajectory)")
    return parser


def _wave_config(args):
    return datagen.WaveConfig(g=args.grid, dt=args.dt, T=args.T, sample_stride=args.sample_stride)


def cmd_fit(args):
    if args.gamma is not None:
        gammas = (args.gamma,)
    elif args.gamma_sweep:
        gammas = tuple(args.gamma_sweep)
    else:
        gammas = DEFAULT_SWEEP
    if not args.output and not args.discard_v:
        raise ArgumentError("--output is required unless --discard-v is given")
    cfg = StreamConfig(
        chunk_width=args.chunk_width,
        q=args.rank,
        n=args.reduced_dim,
        gammas=gammas,
        source=args.input,
        checkpoint_path=args.checkpoint,
        checkpoint_every=args.checkpoint_every,
        rebuild_every=args.rebuild_every,
        linear=args.linear,
        keep_v=not args.discard_v,
        reuse_selection=args.reuse_selection,
        max_chunks=args.max_chunks,
        reproducible=args.reproducible,
        wave=_wave_config(args),
    )
    if args.mu_list:
        cfg = replace(cfg, train_mus=tuple(args.mu_list))
    validation = qmf.read_matrix(args.validation) if args.validation else None
    test = qmf.read_matrix(args.test) if args.test else None
    state, report, man = run_stream(cfg, validation=validation, test=test)
    if man is not None and args.output:
        save_manifold(man, args.output)
    if args.report:
        report.save(args.report)
    log.info(
        "processed %d chunks (%d columns), rank %d, gamma %s, test error %s",
        report.chunks_processed, report.columns_seen, state.rank, report.gamma, report.test_error,
    )
    return 0


def cmd_eval(args):
    man = load_manifold(args.manifold)
    test = qmf.read_matrix(args.test)
    print(json.dumps({"test_error": evaluate(man, test)}))
    return 0


def cmd_gen(args):
    cfg = _wave_config(args)
    os.makedirs(args.dump, exist_ok=True)
    for k, mu in enumerate(args.mu_list):
        traj = replace(cfg, mu=mu)
        width = args.chunk_width or traj.n_samples
        path = os.path.join(args.dump, f"traj_{k:04d}.qmf")
        qmf.write_stream(path, datagen.trajectory_stream(traj, width))
        log.info("wrote %s (mu=%g, %d snapshots)", path, mu, traj.n_samples)
    return 0


COMMANDS = {"fit": cmd_fit, "eval": cmd_eval, "gen": cmd_gen}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except StreamQMError as exc:
        print(f"streamqm: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"streamqm: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
