"""Command line interface: ``kisa {gen,run,amari,plot-data,oracle}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure in every
trial.
"""

import argparse
import json
import logging
import sys

import numpy as np

from .datagen import RhoSpec, load_glyphs, make_observation
from .experiment import ExperimentSpec, emit_plot_data, result_from_dir, run_experiment
from .fcov import FunctionSet, GramCost
from .io import load_matrix, save_matrix
from .metrics import amari_index
from .model import BlockStructure
from .permsearch import MAX_EXHAUSTIVE_D, exhaustive_permutation, greedy_permutation

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

logger = logging.getLogger("kisa")


class ConfigError(Exception):
    pass


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI experiment configuration; flags override it")
    p.add_argument("--database", choices=["dspherical", "aomega"])
    p.add_argument("--letters", help='comma separated letter names, or "all"')
    p.add_argument("--M", type=int, help="number of subspaces (d-spherical)")
    p.add_argument("--d", type=int, help="subspace dimension (d-spherical)")
    p.add_argument("--rho", action="append",
                   help="radius law per subspace: uniform | exp:RATE | lognormal:MU:SIGMA")
    p.add_argument("--T", type=int, action="append", help="sample size (repeatable)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--fset", help='function set, e.g. "cos,cos2"')
    p.add_argument("--mixing", choices=["orthogonal", "identity"])
    p.add_argument("--ica-tol", type=float)
    p.add_argument("--ica-max-iter", type=int)
    p.add_argument("--max-sweeps", type=int)
    p.add_argument("--swap-threshold", type=float)


def spec_from_args(args, out=None) -> ExperimentSpec:
    over = dict(
        database=args.database,
        M=args.M,
        d=args.d,
        T_list=tuple(args.T) if args.T else None,
        trials=getattr(args, "trials", None),
        seed=args.seed,
        mixing=args.mixing,
        ica_tol=args.ica_tol,
        ica_max_iter=args.ica_max_iter,
        max_sweeps=args.max_sweeps,
        swap_threshold=args.swap_threshold,
        out=out,
    )
    try:
        if args.letters:
            over["letters"] = tuple(load_glyphs().resolve(args.letters))
        if args.rho:
            over["rhos"] = tuple(RhoSpec.parse(r) for r in args.rho)
        if args.fset:
            over["fset"] = FunctionSet.parse(args.fset).names
        if args.config:
            return ExperimentSpec.load(args.config, **over)
        spec = ExperimentSpec(**{k: v for k, v in over.items() if v is not None})
    except (ValueError, KeyError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def _blocks(args) -> BlockStructure:
    try:
        return BlockStructure(args.M, args.d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--M and --d are required: {exc}") from exc


def cmd_gen(args) -> int:
    spec = spec_from_args(args)
    z, A, s = make_observation(spec, spec.seed)
    save_matrix(args.out, z)
    if args.mixing_out:
        save_matrix(args.mixing_out, A)
    if args.sources_out:
        save_matrix(args.sources_out, s)
    print(f"wrote {z.shape[0]}x{z.shape[1]} observation to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    spec = spec_from_args(args, out=args.out)
    if spec.out is None:
        raise ConfigError("--out (or 'out' in the config) is required")
    result = run_experiment(spec, jobs=args.jobs)
    for T, n, mean, std in result.aggregates():
        print(f"T={T:>6d}  n={n:>3d}  amari = {100 * mean:.2f}% +/- {100 * std:.2f}")
    for rec in result.failed:
        print(f"T={rec.T} trial={rec.trial} failed: {rec.error}", file=sys.stderr)
    if len(result.failed) == len(result.records):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_amari(args) -> int:
    try:
        W, A = load_matrix(args.W), load_matrix(args.A)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    rep = amari_index(W @ A, _blocks(args))
    print(f"r = {rep.r!r}")
    print(f"percent = {rep.percent:.4f}%")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    try:
        result = result_from_dir(args.results)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    fit = emit_plot_data(result, args.out, mode=args.mode)
    if fit is not None:
        print(f"power law: c = {fit.c:.4f}, r2 = {fit.r2:.4f}")
    else:
        print("power law fit omitted (fewer than 3 sample sizes)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    blocks = _blocks(args)
    if blocks.D > MAX_EXHAUSTIVE_D:
        raise ConfigError(f"oracle needs D <= {MAX_EXHAUSTIVE_D}, got {blocks.D}")
    fset = FunctionSet.parse(args.fset)
    if args.input:
        y = load_matrix(args.input)
    else:
        # scrambled d-spherical instance
        spec = ExperimentSpec(M=blocks.M, d=blocks.d, rhos=(RhoSpec.uniform(),) * blocks.M,
                              T_list=(args.T or 10000,), mixing="identity")
        _, _, s = make_observation(spec, args.seed or 0)
        y = s[np.random.default_rng(args.seed).permutation(blocks.D)]
    gperm, trace = greedy_permutation(y, blocks, fset)
    eperm = exhaustive_permutation(y, blocks, fset)
    gram = GramCost(y, fset, blocks)
    g_cost, e_cost = gram.cost(gperm.order), gram.cost(eperm.order)
    same = bool(np.isclose(g_cost, e_cost, rtol=1e-9, atol=0.0))
    print(json.dumps({
        "greedy_order": gperm.order.tolist(), "greedy_cost": g_cost, "sweeps": trace.sweeps,
        "exhaustive_order": eperm.order.tolist(), "exhaustive_cost": e_cost, "agree": same,
    }))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kisa", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        # subparsers do not inherit allow_abbrev
        return sub.add_parser(name, allow_abbrev=False, **kw)

    p = add("gen", help="generate one observation and write it to file")
    _add_spec_args(p)
    p.add_argument("--out", required=True, help="output matrix (.csv or binary)")
    p.add_argument("--mixing-out", help="also write the mixing matrix")
    p.add_argument("--sources-out", help="also write the sources")
    p.set_defaults(func=cmd_gen)

    p = add("run", help="run a multi-trial experiment")
    _add_spec_args(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="run directory")
    p.set_defaults(func=cmd_run)

    p = add("amari", help="normalised Amari distance of W @ A")
    p.add_argument("--W", required=True)
    p.add_argument("--A", required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.set_defaults(func=cmd_amari)

    p = add("plot-data", help="error curve and power-law fit from a run directory")
    p.add_argument("--results", required=True, help="run directory")
    p.add_argument("--out", required=True, help="CSV to write")
    p.add_argument("--mode", choices=["linear", "loglog"], default="loglog")
    p.set_defaults(func=cmd_plot_data)

    p = add("oracle", help="greedy vs exhaustive permutation search (D <= 8)")
    p.add_argument("--input", help="matrix of ICA outputs; a random instance if omitted")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--fset", default="cos,cos2")
    p.add_argument("--T", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"kisa: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
