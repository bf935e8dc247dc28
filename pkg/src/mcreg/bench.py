"""Replicated simulation benchmark: simulate, tune, fit and score each method."""
import csv
import math
import traceback

import numpy as np

from . import metrics, simgen
from ._parallel import pmap
from .baselines import tune_sep
from .lasso import SolverConfig
from .mcr import symmetrize_pattern, tune_amcr

METHODS = ("amcr", "sep")

# per-replication metrics, in output order
METRIC_ORDER = [
    "frob", "frob_sq", "one_norm", "inf_norm",
    "dist_B", "spe_B", "sen_B", "mcc_B",
    "dist_Omega", "spe_Omega", "sen_Omega", "mcc_Omega",
    "lambda1", "lambda2", "kkt_max",
]


def replication_seed(seed, r):
    """Seed of replication ``r``: a fixed function of ``(seed, r)`` only."""
    return int(np.random.SeedSequence([int(seed), int(r)]).generate_state(1, np.uint64)[0] >> 1)


def score_fit(B_hat, Gamma_hat, truth, rule):
    pattern = symmetrize_pattern(Gamma_hat, rule)
    est = metrics.estimation_errors(B_hat, truth.B_star)
    sel_b = metrics.coefficient_selection(B_hat, truth.B_star)
    sel_o = metrics.precision_selection(pattern, truth.Omega_star)
    return {
        "frob": est.frob, "frob_sq": est.frob ** 2,
        "one_norm": est.one_norm, "inf_norm": est.inf_norm,
        "dist_B": sel_b.dist, "spe_B": sel_b.spe, "sen_B": sel_b.sen, "mcc_B": sel_b.mcc,
        "dist_Omega": sel_o.dist, "spe_Omega": sel_o.spe, "sen_Omega": sel_o.sen,
        "mcc_Omega": sel_o.mcc,
    }


def run_method(method, ds, truth, cfg, rule="or", threads=1, **opts):
    """Tune and fit one method on one dataset; returns its metric dict."""
    if method == "amcr":
        res = tune_amcr(ds.X, ds.Y, cfg=cfg, threads=threads, rule=rule, **opts)
    elif method == "sep":
        res = tune_sep(ds.X, ds.Y, cfg=cfg, threads=threads, rule=rule,
                       max_df=opts.get("max_df", "auto"))
    else:
        raise ValueError(f"unknown method {method!r}")
    fit = res.best_fit
    out = score_fit(fit.B, fit.Gamma, truth, rule)
    out["lambda1"] = res.best_lambda1
    out["lambda2"] = res.best_lambda2
    out["kkt_max"] = fit.kkt_max
    return out


def run_replication(spec, r, seed, methods=METHODS, cfg=None, rule="or", threads=1, **opts):
    """One replication; a failing method is reported, not raised."""
    cfg = cfg or SolverConfig()
    ds, truth = simgen.gen_dataset(spec.with_seed(replication_seed(seed, r)))
    rows = {}
    for m in methods:
        try:
            rows[m] = run_method(m, ds, truth, cfg, rule, threads, **opts)
        except Exception as exc:  # recorded and carried on
            rows[m] = {"error": f"{type(exc).__name__}: {exc}",
                       "trace": traceback.format_exc(limit=3)}
    return rows


def run_bench(spec, reps, seed=0, methods=METHODS, cfg=None, rule="or", threads=1,
              progress=None, **opts):
    """Run ``reps`` replications.

    With ``threads > 1`` the replications run concurrently and each
    replication fits its responses sequentially; the results do not depend
    on the split.  Returns a list (one entry per replication) of
    ``{method: metrics}`` dicts.
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")

    def one(r):
        out = run_replication(spec, r, seed, methods, cfg, rule,
                              threads if reps == 1 else 1, **opts)
        if progress:
            progress(r, out)
        return out

    return pmap(one, range(reps), threads if reps > 1 else 1)


def long_rows(results):
    """Flatten to ``(rep, method, metric, value)`` tuples; failures get metric ``error``."""
    rows = []
    for r, rep in enumerate(results):
        for m, vals in rep.items():
            if "error" in vals:
                rows.append((r, m, "error", vals["error"]))
                continue
            for key in METRIC_ORDER:
                if key in vals:
                    rows.append((r, m, key, vals[key]))
    return rows


def write_results_csv(path, results):
    from .io import format_float

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "method", "metric", "value"])
        for r, m, key, val in long_rows(results):
            w.writerow([r, m, key, val if isinstance(val, str) else format_float(val)])


def read_results_csv(path):
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append((int(rec["rep"]), rec["method"], rec["metric"], rec["value"]))
    return out


def table_format(mean, se):
    """``3.28(.074)``: the mean to 2 decimals and the stderr to 3, leading zero dropped."""
    if not math.isfinite(mean):
        return "NA"
    m = f"{mean:.2f}"
    if not math.isfinite(se):
        return m
    s = f"{se:.3f}"
    if s.startswith("0."):
        s = s[1:]
    return f"{m}({s})"


def summarize_results(results, methods=None):
    """Per method and metric: mean, stderr (sd / sqrt(R)), count and table string."""
    methods = methods or sorted({m for rep in results for m in rep})
    summary = {"reps": len(results), "partial": False, "methods": {}, "failures": []}
    for m in methods:
        per_metric = {}
        ok = [rep[m] for rep in results if m in rep and "error" not in rep[m]]
        for r, rep in enumerate(results):
            if m in rep and "error" in rep[m]:
                summary["failures"].append({"rep": r, "method": m, "error": rep[m]["error"]})
        for key in METRIC_ORDER:
            vals = [v[key] for v in ok if key in v]
            mean, se = metrics.summarize(vals)
            per_metric[key] = {"mean": mean, "stderr": se, "n": len(vals),
                               "table": table_format(mean, se)}
        summary["methods"][m] = per_metric
    summary["partial"] = bool(summary["failures"])
    return summary


def normality_study(spec, reps, seed=0, k=0, alpha=None, cfg=None, **opts):
    """Repeated aMCR fits on one fixed truth, for the limiting-normal check.

    The truth comes from ``spec.seed``; each replication redraws X and the
    noise.  Returns ``(stats, recovered)``: the standardized statistic of
    response ``k`` along ``alpha`` (NaN when the signs were not recovered)
    and the per-replication sign-recovery flags.
    """
    cfg = cfg or SolverConfig()
    truth = simgen.gen_truth(spec)
    A = metrics.active_set(truth, k)
    if A.size == 0:
        raise ValueError(f"response {k} has an empty active set under this truth")
    if alpha is None:
        alpha = np.ones(A.size) / np.sqrt(A.size)
    stats = np.full(reps, np.nan)
    recovered = np.zeros(reps, dtype=bool)
    for r in range(reps):
        rngs = simgen.streams(replication_seed(seed, r))
        X, Y = simgen.sample_data(truth, spec.n, rngs[2], rngs[3])
        ds = simgen.make_dataset(X, Y)
        fit = tune_amcr(ds.X, ds.Y, cfg=cfg, threads=1, **opts).best_fit
        recovered[r] = metrics.sign_recovered(fit.B, fit.Gamma, truth, k)
        if recovered[r]:
            stats[r] = metrics.standardized_statistic(fit.B, fit.Gamma, truth, ds.X, k, alpha)
    return stats, recovered
