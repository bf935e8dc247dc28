"""Command line: ``mcreg simulate | fit | bench | export-graph``.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.
"""
import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__, bench, io, simgen, tuning
from ._parallel import default_threads
from .baselines import fit_sep, tune_sep
from .lasso import ConvergenceError, SolverConfig
from .linalg import NotPositiveDefiniteError
from .mcr import (DEFAULT_LAMBDA_INIT, FitError, default_max_df, fit_initial_separate,
                  fit_mcr, reconstruct_precision, symmetrize_pattern, tune_amcr)
from .metrics import predictive_square_error

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _lambda_init_arg(s):
    if s.lower() == "bic":
        return None
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'bic', got {s!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("initial lambda must be positive")
    return v


def _nonneg_float(s):
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _write_manifest(out, command, args, inputs=None, seed=None):
    """The only file that carries a timestamp."""
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    man = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": cfg,
        "inputs": {name: io.file_sha256(path) for name, path in (inputs or {}).items()},
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    io.write_json(os.path.join(out, "manifest.json"), man)


def _finite_or_none(a):
    a = np.asarray(a, dtype=float)
    return [[float(v) if np.isfinite(v) else None for v in row] for row in np.atleast_2d(a)]


# -- simulate ---------------------------------------------------------------

def cmd_simulate(args):
    explicit = [args.p, args.q, args.n, args.cb, args.comega]
    if args.model is not None and any(v is not None for v in explicit):
        raise UsageError("give either --model or --p/--q/--n/--cb/--comega, not both")
    if args.model is not None:
        spec = simgen.preset(args.model, args.seed)
    else:
        if any(v is None for v in explicit):
            raise UsageError("need --model, or all of --p --q --n --cb --comega")
        try:
            spec = simgen.ModelSpec(args.p, args.q, args.n, args.cb, args.comega, args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    ds, truth = simgen.gen_dataset(spec)
    X, Y = ds.raw()
    os.makedirs(args.out, exist_ok=True)
    io.write_matrix(os.path.join(args.out, "X.csv"), X)
    io.write_matrix(os.path.join(args.out, "Y.csv"), Y)
    io.write_matrix(os.path.join(args.out, "B_star.csv"), truth.B_star)
    io.write_matrix(os.path.join(args.out, "Omega_star.csv"), truth.Omega_star)
    _write_manifest(args.out, "simulate", args, seed=args.seed)
    return EXIT_OK


# -- fit --------------------------------------------------------------------

def _split(n, fraction, seed):
    if not 0 < fraction < 1:
        raise UsageError("--test-fraction must lie in (0, 1)")
    n_test = int(round(n * fraction))
    if n_test < 1 or n_test > n - 2:
        raise UsageError(f"--test-fraction {fraction} leaves no usable train/test split for n = {n}")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    return train, test


def cmd_fit(args):
    X = io.read_matrix(args.x)
    Y = io.read_matrix(args.y)
    if X.shape[0] != Y.shape[0]:
        raise UsageError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    q = Y.shape[1]
    labels = io.read_labels(args.labels) if args.labels else None
    if labels is not None and len(labels) != q:
        raise UsageError(f"{len(labels)} labels for {q} responses")
    if not args.tune and (args.lambda1 is None or args.lambda2 is None):
        raise UsageError("give --tune or both --lambda1 and --lambda2")
    if args.tune and (args.lambda1 is not None or args.lambda2 is not None):
        raise UsageError("--tune and explicit lambdas are exclusive")

    train = test = None
    if args.test_fraction is not None:
        train, test = _split(X.shape[0], args.test_fraction, args.split_seed)
        ds = simgen.make_dataset(X[train], Y[train])
    else:
        ds = simgen.make_dataset(X, Y)
    n = ds.n
    cfg = SolverConfig()
    threads = args.threads
    max_df = default_max_df(n)
    report = {"method": args.method, "n": n, "p": X.shape[1], "q": q,
              "sym_rule": args.sym_rule, "tuned": bool(args.tune)}

    if args.method == "amcr":
        init = fit_initial_separate(ds.X, ds.Y, args.lambda_init, cfg, "residual",
                                    threads=threads, max_df=max_df)
        report["lambda_init"] = args.lambda_init if args.lambda_init is not None else "bic"
        if args.tune:
            res = tune_amcr(ds.X, ds.Y, cfg=cfg, threads=threads, init=init, max_df=max_df)
            fit = res.best_fit
        else:
            fit = fit_mcr(ds.X, ds.Y, args.lambda1, args.lambda2, init, cfg, threads)
        l1, l2 = fit.lambda1, fit.lambda2
    else:
        if args.tune:
            res = tune_sep(ds.X, ds.Y, cfg=cfg, threads=threads, rule=args.sym_rule,
                           max_df=max_df)
            fit = res.best_fit
        else:
            fit = fit_sep(ds.X, ds.Y, args.lambda1, args.lambda2, cfg, args.sym_rule, threads)
        l1, l2 = fit.lambdas_used

    pattern = symmetrize_pattern(fit.Gamma, args.sym_rule)
    report.update(lambda1=l1, lambda2=l2,
                  residual_variances=[float(v) for v in fit.residual_variances],
                  kkt_max=fit.kkt_max,
                  n_edges=len(pattern.edges()),
                  selected_covariates=int(np.count_nonzero(np.any(fit.B != 0, axis=1))))
    if args.tune:
        grid = tuning.default_grid()
        report["lambda1_grid"] = [float(v) for v in grid.lambda1_values]
        report["lambda2_grid"] = [float(v) for v in grid.lambda2_values]
        report["bic_surface"] = _finite_or_none(res.score_surface)
        report["best_index"] = list(res.best_index)
    if test is not None:
        report["n_train"] = int(train.size)
        report["n_test"] = int(test.size)
        report["pse"] = predictive_square_error(fit.B, X[test], Y[test], ds.x_means, ds.y_means)

    os.makedirs(args.out, exist_ok=True)
    io.write_matrix(os.path.join(args.out, "B_hat.csv"), fit.B)
    if args.method == "amcr":
        io.write_matrix(os.path.join(args.out, "Gamma_hat.csv"), fit.Gamma)
    io.write_pattern(os.path.join(args.out, "pattern.json"), pattern, labels, args.sym_rule)
    if args.reconstruct:
        omega = reconstruct_precision(fit.Gamma, fit.residual_variances, pattern)
        io.write_matrix(os.path.join(args.out, "omega_hat.csv"), omega)
    io.write_json(os.path.join(args.out, "fit_report.json"), report)
    inputs = {"x": args.x, "y": args.y}
    if args.labels:
        inputs["labels"] = args.labels
    _write_manifest(args.out, "fit", args, inputs, seed=args.split_seed)
    return EXIT_OK


# -- bench ------------------------------------------------------------------

def cmd_bench(args):
    spec = simgen.preset(args.model, args.seed)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = [m for m in methods if m not in bench.METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}; choose from {list(bench.METHODS)}")
    opts = {"lambda_init": args.lambda_init}
    results = bench.run_bench(spec, args.reps, args.seed, methods, SolverConfig(),
                              args.sym_rule, args.threads, **opts)
    os.makedirs(args.out, exist_ok=True)
    bench.write_results_csv(os.path.join(args.out, "bench_results.csv"), results)
    summary = bench.summarize_results(results, list(methods))
    summary.update(model=args.model, seed=args.seed, sym_rule=args.sym_rule,
                   lambda_init=args.lambda_init if args.lambda_init is not None else "bic",
                   spec={"p": spec.p, "q": spec.q, "n": spec.n,
                         "b_nonzero_expect": spec.b_nonzero_expect,
                         "omega_nonzero_expect": spec.omega_nonzero_expect})
    io.write_json(os.path.join(args.out, "bench_summary.json"), summary)
    _write_manifest(args.out, "bench", args, seed=args.seed)
    for m in methods:
        row = summary["methods"][m]
        print(m, " ".join(f"{k}={row[k]['table']}" for k in
                          ("frob", "mcc_B", "spe_B", "sen_B", "mcc_Omega", "spe_Omega", "sen_Omega")))
    if summary["partial"]:
        print(f"warning: {len(summary['failures'])} failed fits, summary is partial",
              file=sys.stderr)
    return EXIT_OK


# -- export-graph -----------------------------------------------------------

def cmd_export_graph(args):
    try:
        pattern, labels = io.read_pattern(args.pattern)
    except ValueError as exc:
        if isinstance(exc.__cause__, OSError):
            raise exc.__cause__
        raise UsageError(str(exc)) from exc
    if args.format == "dot":
        text = io.pattern_to_dot(pattern, labels)
    else:
        text = json.dumps(io.pattern_to_graph_json(pattern, labels), indent=2) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="mcreg", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="draw a seeded dataset and its ground truth")
    sp.add_argument("--model", type=int, choices=range(1, 7), metavar="{1..6}")
    sp.add_argument("--p", type=_pos_int)
    sp.add_argument("--q", type=_pos_int)
    sp.add_argument("--n", type=_pos_int)
    sp.add_argument("--cb", type=_nonneg_float, help="expected nonzeros per column of B")
    sp.add_argument("--comega", type=_nonneg_float, help="expected nonzeros per row of Omega")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    fp = sub.add_parser("fit", help="fit aMCR or SEP to CSV data")
    fp.add_argument("--x", required=True)
    fp.add_argument("--y", required=True)
    fp.add_argument("--method", choices=("amcr", "sep"), default="amcr")
    fp.add_argument("--lambda1", type=_nonneg_float)
    fp.add_argument("--lambda2", type=_nonneg_float)
    fp.add_argument("--tune", action="store_true", help="pick lambdas by BIC on the 19x19 grid")
    fp.add_argument("--lambda-init", type=_lambda_init_arg, default=DEFAULT_LAMBDA_INIT,
                    help="lambda of the initial separate Lasso, or 'bic' (default %(default)s)")
    fp.add_argument("--sym-rule", choices=("or", "and"), default="or")
    fp.add_argument("--threads", type=_pos_int, default=default_threads())
    fp.add_argument("--reconstruct", action="store_true", help="also write omega_hat.csv")
    fp.add_argument("--labels", help="response names, one per line")
    fp.add_argument("--test-fraction", type=float)
    fp.add_argument("--split-seed", type=int, default=0)
    fp.add_argument("--out", required=True)
    fp.set_defaults(func=cmd_fit)

    bp = sub.add_parser("bench", help="replicated simulation benchmark")
    bp.add_argument("--model", type=int, choices=range(1, 7), metavar="{1..6}", required=True)
    bp.add_argument("--reps", type=_pos_int, default=50)
    bp.add_argument("--seed", type=int, default=0)
    bp.add_argument("--methods", default="amcr,sep")
    bp.add_argument("--lambda-init", type=_lambda_init_arg, default=DEFAULT_LAMBDA_INIT)
    bp.add_argument("--sym-rule", choices=("or", "and"), default="or")
    bp.add_argument("--threads", type=_pos_int, default=default_threads())
    bp.add_argument("--out", required=True)
    bp.set_defaults(func=cmd_bench)

    gp = sub.add_parser("export-graph", help="write a pattern as DOT or JSON")
    gp.add_argument("pattern")
    gp.add_argument("--format", choices=("dot", "json"), default="dot")
    gp.add_argument("--out")
    gp.set_defaults(func=cmd_export_graph)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mcreg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.IngestionError as exc:
        print(f"mcreg: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"mcreg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FitError, ConvergenceError, NotPositiveDefiniteError, tuning.TuningError,
            np.linalg.LinAlgError) as exc:
        where = getattr(exc, "k", None)
        if where is None:
            where = getattr(exc, "index", None)
        extra = f" (response {where})" if where is not None else ""
        print(f"mcreg: numerical failure{extra}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
