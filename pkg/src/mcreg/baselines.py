"""Separate estimation (SEP): each beta_k alone, then neighbourhood selection.

The coefficient stage regresses ``y^k`` on X only.  The precision pattern
comes from regressing each residual ``r^k = y^k - X beta_k`` on the other
residuals and symmetrising the neighbourhoods.
"""
from dataclasses import dataclass

import numpy as np

from . import tuning
from ._parallel import pmap
from .lasso import ConvergenceError, SolverConfig, grid_path, solve_gram
from .mcr import FitError, PrecisionPattern, _check_xy, _others, symmetrize_pattern


@dataclass
class SepFit:
    B: np.ndarray
    pattern: PrecisionPattern
    lambdas_used: tuple
    Gamma: np.ndarray
    residual_variances: np.ndarray
    kkt: np.ndarray = None

    @property
    def kkt_max(self):
        return float(np.max(self.kkt)) if self.kkt is not None and self.kkt.size else 0.0


def _coef_stage(x_stats, y_col, yy, lam, cfg):
    # sees only (X, y^k) through X'X and X'y^k
    GX = x_stats
    coef, grad = solve_gram(GX, y_col, yy, np.full(y_col.shape[0], float(lam)), cfg)
    return coef, grad


def _kkt(coef, grad, lam):
    g2 = 2 * grad
    v = np.where(coef != 0, np.abs(g2 - lam * np.sign(coef)), np.abs(g2) - lam)
    return float(max(v.max(initial=0.0), 0.0))


def fit_coefficients(X, Y, lambda_B, cfg=None, threads=None):
    cfg = cfg or SolverConfig()
    GX = X.T @ X

    def one(k):
        y = Y[:, k]
        try:
            coef, grad = _coef_stage(GX, X.T @ y, float(y @ y), lambda_B, cfg)
        except ConvergenceError as exc:
            raise FitError(f"SEP coefficient stage failed for response {k}", k=k, stage="B") from exc
        return coef, _kkt(coef, grad, lambda_B)

    out = pmap(one, range(Y.shape[1]), threads)
    return np.column_stack([o[0] for o in out]), np.array([o[1] for o in out])


def fit_neighbourhoods(R, lambda_Omega, cfg=None, threads=None):
    """Lasso of each residual column on the others; returns (Gamma, rss, kkt)."""
    cfg = cfg or SolverConfig()
    q = R.shape[1]
    GR = R.T @ R
    Gamma = np.zeros((q, q))
    rss = np.diag(GR).copy()
    kkt = np.zeros(q)
    if q == 1:
        return Gamma, rss, kkt

    def one(k):
        idx = _others(q, k)
        c = GR[idx, k]
        try:
            coef, grad = solve_gram(GR[np.ix_(idx, idx)], c, GR[k, k],
                                    np.full(q - 1, float(lambda_Omega)), cfg)
        except ConvergenceError as exc:
            raise FitError(f"SEP neighbourhood stage failed for response {k}", k=k,
                           stage="Omega") from exc
        return coef, _kkt(coef, grad, lambda_Omega)

    for k, (coef, v) in enumerate(pmap(one, range(q), threads)):
        idx = _others(q, k)
        Gamma[idx, k] = coef
        r = R[:, k] - R[:, idx] @ coef
        rss[k] = r @ r
        kkt[k] = v
    return Gamma, rss, kkt


def fit_sep(X, Y, lambda_B, lambda_Omega, cfg=None, rule="or", threads=None):
    X, Y = _check_xy(X, Y)
    n = X.shape[0]
    B, kkt_b = fit_coefficients(X, Y, lambda_B, cfg, threads)
    R = Y - X @ B
    Gamma, rss, kkt_o = fit_neighbourhoods(R, lambda_Omega, cfg, threads)
    pattern = symmetrize_pattern(Gamma, rule)
    return SepFit(B, pattern, (float(lambda_B), float(lambda_Omega)), Gamma, rss / n,
                  np.maximum(kkt_b, kkt_o))


class SepFitter:
    """Grid-search adaptor for SEP.

    ``mode="joint"`` scores every (lambda_B, lambda_Omega) cell with the same
    criterion as aMCR: for response k the residual sum of squares of
    ``y^k - X b_k - (Y^{-k} - X B_{-k}) g_k``, which for SEP is the residual
    of the neighbourhood regression, and df = nnz(b_k) + nnz(g_k).
    ``mode="sequential"`` picks lambda_B from the coefficient regressions
    alone and then lambda_Omega on the residuals at that fit; its surface
    is the sum of the two 1-D profiles.
    """

    name = "sep"

    def __init__(self, rule="or", threads=None, max_df=None, mode="joint"):
        if mode not in ("joint", "sequential"):
            raise ValueError("mode must be 'joint' or 'sequential'")
        self.rule = rule
        self.threads = threads
        self.max_df = max_df
        self.mode = mode

    def _b_paths(self, X, Y, lambdas, cfg, keep=False):
        p = X.shape[1]
        GX = X.T @ X
        XtY = X.T @ Y
        ones = np.ones(p)
        group = np.zeros(p, dtype=np.int64)

        def path(k):
            return grid_path(GX, XtY[:, k], float(Y[:, k] @ Y[:, k]), ones, group,
                             lambdas, np.ones(1), cfg, keep=keep, df_cap=self.max_df)

        paths = pmap(path, range(Y.shape[1]), self.threads)
        if not all(pth["converged"].all() for pth in paths):
            raise FitError("SEP coefficient path did not converge")
        return paths

    def _omega_paths(self, R, lambdas, cfg):
        q = R.shape[1]
        GR = R.T @ R
        ones = np.ones(q - 1)
        group = np.zeros(q - 1, dtype=np.int64)

        def path(k):
            idx = _others(q, k)
            return grid_path(np.ascontiguousarray(GR[np.ix_(idx, idx)]), GR[idx, k],
                             float(GR[k, k]), ones, group, lambdas, np.ones(1), cfg,
                             df_cap=self.max_df)

        paths = pmap(path, range(q), self.threads)
        if not all(pth["converged"].all() for pth in paths):
            raise FitError("SEP neighbourhood path did not converge")
        return paths

    def _profile_b(self, X, Y, lambdas, cfg):
        n = X.shape[0]
        return sum(tuning.bic_value(pth["rss"][:, 0], pth["df"][:, 0], n, self.max_df)
                   for pth in self._b_paths(X, Y, lambdas, cfg))

    def _profile_omega(self, R, lambdas, cfg):
        n, q = R.shape
        if q == 1:
            return np.zeros(lambdas.size)
        return sum(tuning.bic_value(pth["rss"][:, 0], pth["df"][:, 0], n, self.max_df)
                   for pth in self._omega_paths(R, lambdas, cfg))

    def _joint(self, X, Y, grid, cfg):
        n, q = Y.shape
        l1, l2 = grid.lambda1_values, grid.lambda2_values
        b_paths = self._b_paths(X, Y, l1, cfg, keep=True)
        scores = np.full((l1.size, l2.size), np.inf)
        for s in range(l1.size):
            if any(pth["skipped"][s, 0] for pth in b_paths):
                continue
            B = np.column_stack([pth["coefs"][s, 0] for pth in b_paths])
            df_b = np.array([pth["df"][s, 0] for pth in b_paths])
            R = Y - X @ B
            if q == 1:
                rss = np.array([float(R[:, 0] @ R[:, 0])])[:, None] * np.ones((1, l2.size))
                df = np.broadcast_to(df_b[:, None], (1, l2.size))
                scores[s] = tuning.bic_value(rss, df, n, self.max_df).sum(axis=0)
                continue
            total = np.zeros(l2.size)
            for k, pth in enumerate(self._omega_paths(R, l2, cfg)):
                total += tuning.bic_value(pth["rss"][:, 0], pth["df"][:, 0] + df_b[k], n,
                                          self.max_df)
            scores[s] = total
        return scores

    def surface(self, X, Y, grid, cfg, keep_fits=False):
        if self.mode == "joint":
            return self._joint(X, Y, grid, cfg), None, None
        prof_b = self._profile_b(X, Y, grid.lambda1_values, cfg)
        s = tuning.argmin_1d(prof_b)
        B, _ = fit_coefficients(X, Y, grid.lambda1_values[s], cfg, self.threads)
        prof_o = self._profile_omega(Y - X @ B, grid.lambda2_values, cfg)
        return prof_b[:, None] + prof_o[None, :], None, None

    def fit(self, X, Y, lambda1, lambda2, cfg):
        return fit_sep(X, Y, lambda1, lambda2, cfg, self.rule, self.threads)


def tune_sep(X, Y, grid=None, cfg=None, threads=None, rule="or", max_df="auto", mode="joint"):
    """BIC-tuned SEP fit (see ``SepFitter`` for the two tuning modes)."""
    from .mcr import default_max_df

    X, Y = _check_xy(X, Y)
    cfg = cfg or SolverConfig()
    grid = grid or tuning.default_grid()
    if max_df == "auto":
        max_df = default_max_df(X.shape[0])
    return tuning.grid_search(X, Y, grid, SepFitter(rule, threads, max_df, mode), cfg)
