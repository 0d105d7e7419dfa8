"""Command-line front end: ``mph <subcommand> ...``.

Exit codes: 0 success, 2 bad input, 3 fit stopped at the iteration cap,
4 numerical failure.
"""

import argparse
import json
import sys

import numpy as np
from scipy import stats

from . import core, em, erlang, extensions, io, sampling
from .errors import DomainError, InvalidArgumentError, NumericalError, UnsupportedCaseError, ValidationError

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_NUMERIC = 0, 2, 3, 4


class InputError(Exception):
    """Bad command-line input; reported on stderr with exit code 2."""


def _write_json(obj, path):
    text = json.dumps(obj, indent=2)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _plain(model, what):
    if not isinstance(model, core.MphModel):
        raise InputError(f"{what} needs a plain mPH model, not an extension")
    return model


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_fit(args):
    _, X = io.read_csv(args.data)
    if args.scale <= 0:
        raise InputError("--scale must be positive")
    X = X / args.scale
    config = em.FitConfig(p=args.p, max_iters=args.max_iters, tol=args.tol,
                          restarts=args.restarts, seed=args.seed)
    result = em.fit(X, config)
    io.save_model(result.model, args.out)
    report = em.fit_report(result, X.shape[0])
    if args.report:
        _write_json(report, args.report)
    print(f"loglik {report['loglik']:.6f}  df {report['df']}  AIC {report['aic']:.4f}  "
          f"BIC {report['bic']:.4f}  iterations {report['iterations']}", file=sys.stderr)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _parse_time_changes(text, d):
    tcs = []
    for item in text.split(","):
        kind, _, beta = item.strip().partition(":")
        tcs.append(extensions.TimeChange(kind, float(beta) if beta else 1.0))
    if len(tcs) == 1:
        tcs = tcs * d
    if len(tcs) != d:
        raise InputError(f"--miph needs 1 or {d} time changes, got {len(tcs)}")
    return tcs


def cmd_simulate(args):
    if args.n <= 0:
        raise InputError("n must be positive")
    model = io.load_model(args.model)
    if args.miph and args.frac is not None:
        raise InputError("--miph and --frac are mutually exclusive")
    if args.miph:
        model = extensions.MiphModel(_plain(model, "--miph"),
                                     _parse_time_changes(args.miph, model.d))
    elif args.frac is not None:
        model = extensions.FracMphModel(_plain(model, "--frac"), args.frac)
    if isinstance(model, extensions.MiphModel):
        X = extensions.miph_sample(model, args.n, args.seed)
    elif isinstance(model, extensions.FracMphModel):
        X = extensions.frac_sample(model, args.n, args.seed)
    else:
        X = sampling.sample(model, args.n, args.seed)
    io.write_csv(args.out, X)
    return EXIT_OK


_EVALUATORS = {
    core.MphModel: {"density": core.density, "cdf": core.cdf,
                    "survival": core.survival, "laplace": core.laplace},
    extensions.MiphModel: {"density": extensions.miph_density, "cdf": extensions.miph_cdf,
                           "survival": extensions.miph_survival},
    extensions.FracMphModel: {"density": extensions.frac_density, "cdf": extensions.frac_cdf,
                              "survival": extensions.frac_survival},
}


def cmd_evaluate(args):
    model = io.load_model(args.model)
    fn = _EVALUATORS[type(model)].get(args.what)
    if fn is None:
        raise InputError(f"{args.what} is not available for this model type")
    _, P = io.read_csv(args.points, drop_censoring=False)
    if P.shape[1] != model.d:
        raise InputError(f"points have {P.shape[1]} columns, model has d={model.d}")
    strict_positive = args.what == "density"
    bad = np.isnan(P).any(axis=1) | (P <= 0 if strict_positive else P < 0).any(axis=1)
    if bad.any():
        rows = (np.nonzero(bad)[0] + 2).tolist()
        if args.strict:
            raise InputError(f"points outside the domain of {args.what} at rows {rows}")
        print(f"mph evaluate: warning: {bad.sum()} point(s) outside the domain of "
              f"{args.what} (rows {rows[:10]}); writing NaN", file=sys.stderr)
    out = np.full(P.shape[0], np.nan)
    if (~bad).any():
        out[~bad] = fn(model, P[~bad])
    io.write_csv(args.out, out[:, None], header=[args.what])
    return EXIT_OK


def cmd_dependence(args):
    model = _plain(io.load_model(args.model), "dependence")
    mats = core.dependence_matrices(model)
    means = [core.moment(core.sub_model(model, [i]), [1.0]) for i in range(model.d)]
    report = {key: np.asarray(val).tolist() for key, val in mats.items()}
    report["marginal_means"] = [float(v) for v in means]
    report["marginal_sds"] = [core.marginal_sd(model, i) for i in range(model.d)]
    _write_json(report, args.out)
    return EXIT_OK


def cmd_copula_grid(args):
    if args.res <= 0:
        raise InputError("--res must be a positive integer")
    model = _plain(io.load_model(args.model), "copula-grid")
    k, l = args.k - 1, args.l - 1
    levels = (np.arange(args.res) + 0.5) / args.res
    U, V = np.meshgrid(levels, levels, indexing="ij")
    grid = np.column_stack([U.ravel(), V.ravel()])
    c = core.copula_density_grid(model, k, l, grid)
    io.write_csv(args.out, np.column_stack([grid, c]), header=["u", "v", "c"])
    return EXIT_OK


def _builtin_cdf(name):
    if name == "exponential":
        return lambda X: np.prod(-np.expm1(-X), axis=1)
    if name == "lognormal":
        # independent standard lognormal margins; zero has mass 0
        return lambda X: np.prod(stats.lognorm.cdf(X, 1.0), axis=1)
    raise InputError(f"unknown builtin cdf {name!r} (exponential, lognormal)")


def cmd_approximate(args):
    m = [int(v) for v in str(args.m).split(",")]
    if args.data is None and args.cdf is None:
        raise InputError("give a data file or --cdf")
    if args.data is not None and args.cdf is not None:
        raise InputError("give either a data file or --cdf, not both")
    if args.n < 1 or min(m) < 1:
        raise InputError("--n and --m must be positive")
    if args.data is not None:
        _, X = io.read_csv(args.data)
        if len(m) == 1:
            m = m * X.shape[1]
        spec = erlang.discretize_sample(X, args.n, m)
        target = None
    else:
        d = args.d if len(m) == 1 else len(m)
        if len(m) == 1:
            m = m * d
        target = _builtin_cdf(args.cdf)
        spec = erlang.discretize_cdf(target, args.n, m)
    model = erlang.build_erlang_mixture(spec, layout=args.layout)
    io.save_model(model, args.out)
    if args.spec:
        _write_json(spec.to_dict(), args.spec)
    report = {"n": spec.n, "m": list(spec.m), "cells": len(spec.cells), "p": model.p,
              "truncation_mass": spec.truncation_mass,
              "truncation_bound": spec.truncation_bound}
    if target is not None:
        axes = [np.linspace(0, mi / spec.n, 11)[1:] for mi in spec.m]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.d)
        report["sup_error"] = erlang.approximation_error(target, model, grid).sup_error
    _write_json(report, args.report)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="mph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit an mPH model by EM")
    p.add_argument("data")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--scale", type=float, default=1.0, help="divide all data by this")
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--report", help="report JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="draw a sample")
    p.add_argument("model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--miph", metavar="KIND[:BETA],...",
                   help="time changes, e.g. weibull:2,gompertz:0.5")
    p.add_argument("--frac", type=float, metavar="ALPHA")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="density, cdf, survival or Laplace transform")
    p.add_argument("model")
    p.add_argument("--points", required=True)
    p.add_argument("--what", choices=["density", "cdf", "survival", "laplace"],
                   default="density")
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true", help="fail on out-of-domain rows")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dependence", help="Pearson, Kendall and Spearman matrices")
    p.add_argument("model")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_dependence)

    p = sub.add_parser("copula-grid", help="copula density on an interior grid")
    p.add_argument("model")
    p.add_argument("--k", type=int, default=1, help="first margin (1-based)")
    p.add_argument("--l", type=int, default=2, help="second margin (1-based)")
    p.add_argument("--res", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_copula_grid)

    p = sub.add_parser("approximate", help="Erlang-mixture approximation")
    p.add_argument("data", nargs="?")
    p.add_argument("--cdf", help="builtin target: exponential or lognormal")
    p.add_argument("--d", type=int, default=2, help="dimension of a builtin target")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", required=True, help="truncation, one int or a comma list")
    p.add_argument("--layout", choices=["shared", "block"], default="shared")
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--spec", help="also write the cell spec JSON")
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_approximate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValidationError, InvalidArgumentError, DomainError,
            OSError, ValueError) as exc:
        print(f"mph {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, UnsupportedCaseError, FloatingPointError) as exc:
        print(f"mph {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
