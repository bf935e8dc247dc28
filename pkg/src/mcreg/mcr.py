"""Multivariate conditional regression with adaptive Lasso penalties (aMCR).

Each response ``y^k`` is regressed on the covariates and on the other
responses with their covariate effects removed by an initial fit,

    min ||y^k - X b_k - (Y^{-k} - X B0_{-k}) g_k||^2
        + lam1 * sum_j u_jk |b_jk| + lam2 * sum_s v_sk |g_sk|,

with ``u = 1/|B~|`` and ``v = 1/|Gamma~|`` taken from a separate Lasso.
``g_k`` carries the sparsity of column k of the precision matrix, since
``g_k = -Omega_{-k,k} / omega_kk``.  The q fits are independent.
"""
from dataclasses import dataclass, field

import numpy as np

from . import tuning
from ._parallel import pmap
from .lasso import ConvergenceError, SolverConfig, grid_path, kkt_violation, solve_gram

GAMMA_SOURCES = ("response", "residual")


class FitError(RuntimeError):
    """A per-response solve failed; ``partial`` holds whatever finished."""

    def __init__(self, message, k=None, stage=None, partial=None):
        super().__init__(message)
        self.k = k
        self.stage = stage
        self.partial = partial


@dataclass
class InitialFit:
    B0: np.ndarray
    Gamma0: np.ndarray
    lambda_init: np.ndarray      # per response, B stage
    lambda_init_gamma: np.ndarray  # per response, Gamma stage
    gamma_source: str = "response"


@dataclass
class McrFit:
    B: np.ndarray
    Gamma: np.ndarray
    residual_variances: np.ndarray
    lambda1: float
    lambda2: float
    kkt: np.ndarray = field(default=None)  # max KKT residual per response

    @property
    def kkt_max(self):
        return float(np.max(self.kkt)) if self.kkt is not None and self.kkt.size else 0.0


@dataclass
class PrecisionPattern:
    signs: np.ndarray
    magnitudes: np.ndarray = None

    def __post_init__(self):
        self.signs = np.asarray(self.signs, dtype=np.int8)
        q = self.signs.shape[0]
        if self.signs.shape != (q, q):
            raise ValueError("sign pattern must be square")
        if not np.array_equal(self.signs, self.signs.T):
            raise ValueError("sign pattern must be symmetric")
        if not np.all(np.diag(self.signs) == 1):
            raise ValueError("sign pattern must have +1 on the diagonal")
        if not np.all(np.isin(self.signs, (-1, 0, 1))):
            raise ValueError("signs must be -1, 0 or +1")

    @property
    def q(self):
        return self.signs.shape[0]

    def edges(self):
        """Upper-triangle edges as ``(s, k, sign)`` with ``s < k``."""
        s, k = np.nonzero(np.triu(self.signs, 1))
        return [(int(a), int(b), int(self.signs[a, b])) for a, b in zip(s, k)]

    def support(self):
        """Off-diagonal ordered pairs present in the pattern."""
        off = self.signs != 0
        np.fill_diagonal(off, False)
        return off

    def to_dict(self, labels=None, rule=None):
        labels = list(labels) if labels is not None else [f"y{i + 1}" for i in range(self.q)]
        if len(labels) != self.q:
            raise ValueError("need one label per response")
        out = {"q": self.q, "labels": labels}
        if rule is not None:
            out["rule"] = rule
        out["edges"] = [{"source": s, "target": k, "sign": sg} for s, k, sg in self.edges()]
        return out

    @classmethod
    def from_dict(cls, d):
        try:
            q = int(d["q"])
            signs = np.eye(q, dtype=np.int8)
            for e in d["edges"]:
                s, k, sg = int(e["source"]), int(e["target"]), int(e["sign"])
                if s == k or not (0 <= s < q and 0 <= k < q) or sg not in (-1, 1):
                    raise ValueError(f"bad edge {e}")
                signs[s, k] = signs[k, s] = sg
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed pattern: {exc}") from exc
        return cls(signs)


def _others(q, k):
    return np.delete(np.arange(q), k)


def _check_xy(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError(f"X {X.shape} and Y {Y.shape} must be 2-D with equal rows")
    return X, Y


def _tune_1d(G, c, yy, n, lambdas, cfg, max_df, penalty=None):
    """Plain Lasso over a 1-D lambda grid; BIC picks the fit."""
    m = c.shape[0]
    path = grid_path(G, c, yy, np.ones(m), np.zeros(m, dtype=np.int64),
                     lambdas, np.ones(1), cfg, keep=True, df_cap=max_df)
    if not path["converged"].all():
        raise ConvergenceError("initial Lasso path did not converge")
    scores = tuning.bic_value(path["rss"][:, 0], path["df"][:, 0], n, max_df, penalty)
    i = tuning.argmin_1d(scores)
    return path["coefs"][i, 0], float(lambdas[i])


def _lasso_at(G, c, yy, lam, cfg):
    coef, _ = solve_gram(G, c, yy, np.full(c.shape[0], float(lam)), cfg)
    return coef


def fit_initial_separate(X, Y, lambda_init=None, cfg=None, gamma_source="response",
                         grid=None, threads=None, max_df=None, criterion="bic",
                         gamma_criterion=None):
    """Separate (unweighted) Lasso fits giving B~ and Gamma~.

    Column k of ``B0`` regresses ``y^k`` on X.  Column k of ``Gamma0``
    regresses ``y^k`` on the other responses: the raw ``Y^{-k}`` by default,
    or the residuals ``Y^{-k} - X B0_{-k}`` with ``gamma_source="residual"``.
    With ``lambda_init=None`` each regression picks its own lambda by BIC
    over ``grid`` (default: the 19-point log grid).
    """
    cfg = cfg or SolverConfig()
    if gamma_source not in GAMMA_SOURCES:
        raise ValueError(f"gamma_source must be one of {GAMMA_SOURCES}")
    X, Y = _check_xy(X, Y)
    n, p = X.shape
    q = Y.shape[1]
    penalties = {"bic": None, "aic": 2.0}
    penalty = penalties[criterion]
    penalty_g = penalties[gamma_criterion or criterion]
    lambdas = tuning.default_grid().lambda1_values if grid is None else np.asarray(grid, float)
    GX = X.T @ X
    XtY = X.T @ Y
    yy = np.einsum("ij,ij->j", Y, Y)

    def stage_b(k):
        try:
            if lambda_init is None:
                return _tune_1d(GX, XtY[:, k], yy[k], n, lambdas, cfg, max_df, penalty)
            return _lasso_at(GX, XtY[:, k], yy[k], lambda_init, cfg), float(lambda_init)
        except ConvergenceError as exc:
            raise FitError(f"initial B fit failed for response {k}", k=k, stage="B") from exc

    res = pmap(stage_b, range(q), threads)
    B0 = np.column_stack([r[0] for r in res]) if q else np.zeros((p, 0))
    lam_b = np.array([r[1] for r in res])

    R = Y if gamma_source == "response" else Y - X @ B0
    GR = R.T @ R
    RtY = R.T @ Y

    def stage_g(k):
        idx = _others(q, k)
        G = GR[np.ix_(idx, idx)]
        c = RtY[idx, k]
        try:
            if lambda_init is None:
                return _tune_1d(G, c, yy[k], n, lambdas, cfg, max_df, penalty_g)
            return _lasso_at(G, c, yy[k], lambda_init, cfg), float(lambda_init)
        except ConvergenceError as exc:
            raise FitError(f"initial Gamma fit failed for response {k}", k=k, stage="Gamma") from exc

    Gamma0 = np.zeros((q, q))
    lam_g = np.full(q, np.nan)
    if q > 1:
        for k, (coef, lam) in enumerate(pmap(stage_g, range(q), threads)):
            Gamma0[_others(q, k), k] = coef
            lam_g[k] = lam
    return InitialFit(B0, Gamma0, lam_b, lam_g, gamma_source)


def compute_adaptive_weights(init):
    """``u = 1/|B~|`` and ``v = 1/|Gamma~|``; zeros map to ``inf`` (excluded)."""
    with np.errstate(divide="ignore"):
        u = 1.0 / np.abs(init.B0)
        v = 1.0 / np.abs(init.Gamma0)
    np.fill_diagonal(v, np.inf)
    return u, v


def build_augmented_design(X, Y, B0, k):
    """``[X | Y^{-k} - X B0_{-k}]``: covariates first, then responses skipping k."""
    X, Y = _check_xy(X, Y)
    B0 = np.asarray(B0, dtype=float)
    q = Y.shape[1]
    if B0.shape != (X.shape[1], q):
        raise ValueError(f"B0 has shape {B0.shape}, expected {(X.shape[1], q)}")
    if not 0 <= k < q:
        raise IndexError(f"response index {k} out of range for q = {q}")
    idx = _others(q, k)
    return np.hstack([X, Y[:, idx] - X @ B0[:, idx]])


@dataclass
class ConditionalRegression:
    """Sufficient statistics of response k's conditional regression.

    Only coordinates with a finite adaptive weight are kept.
    """
    k: int
    keep: np.ndarray
    G: np.ndarray
    c: np.ndarray
    yy: float
    weights: np.ndarray
    group: np.ndarray
    m: int

    def penalties(self, lambda1, lambda2):
        return np.where(self.group == 0, lambda1, lambda2) * self.weights

    def expand(self, coef):
        full = np.zeros(self.m)
        full[self.keep] = coef
        return full


def conditional_regressions(X, Y, init, threads=None):
    X, Y = _check_xy(X, Y)
    p, q = X.shape[1], Y.shape[1]
    u, v = compute_adaptive_weights(init)

    def build(k):
        w = np.concatenate([u[:, k], v[_others(q, k), k]])
        keep = np.flatnonzero(np.isfinite(w))
        Z = build_augmented_design(X, Y, init.B0, k)[:, keep]
        y = Y[:, k]
        group = (keep >= p).astype(np.int64)
        return ConditionalRegression(k, keep, Z.T @ Z, Z.T @ y, float(y @ y),
                                     w[keep], group, p + q - 1)

    return pmap(build, range(q), threads)


def assemble(coefs, p, q):
    """Stack per-response ``(beta_k, gamma_k)`` vectors into B and Gamma."""
    B = np.zeros((p, q))
    Gamma = np.zeros((q, q))
    for k, z in enumerate(coefs):
        B[:, k] = z[:p]
        Gamma[_others(q, k), k] = z[p:]
    return B, Gamma


def fit_mcr(X, Y, lambda1, lambda2, init, cfg=None, threads=None, regressions=None):
    """Solve the q conditional regressions at ``(lambda1, lambda2)``."""
    cfg = cfg or SolverConfig()
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("lambdas must be nonnegative")
    X, Y = _check_xy(X, Y)
    n, p = X.shape
    q = Y.shape[1]
    regs = regressions or conditional_regressions(X, Y, init, threads)

    def solve(reg):
        if reg.keep.size == 0:
            return np.zeros(reg.m), reg.yy, 0.0
        pen = reg.penalties(lambda1, lambda2)
        try:
            coef, grad = solve_gram(reg.G, reg.c, reg.yy, pen, cfg)
        except ConvergenceError as exc:
            exc.index = reg.k
            return exc
        rss = reg.yy - coef @ reg.c - coef @ grad
        return reg.expand(coef), rss, kkt_violation(coef, grad, pen)

    out = pmap(solve, regs, threads)
    failed = [k for k, o in enumerate(out) if isinstance(o, ConvergenceError)]
    coefs = [o.coef if isinstance(o, ConvergenceError) else o[0] for o in out]
    coefs = [regs[k].expand(c) if isinstance(out[k], ConvergenceError) else c
             for k, c in enumerate(coefs)]
    B, Gamma = assemble(coefs, p, q)
    if failed:
        raise FitError(f"conditional regression failed for response {failed[0]}",
                       k=failed[0], stage="mcr",
                       partial=McrFit(B, Gamma, None, lambda1, lambda2))
    # exact RSS from the residuals rather than the Gram identity
    resid = Y - X @ B
    rss = np.empty(q)
    for k in range(q):
        idx = _others(q, k)
        r = resid[:, k] - (Y[:, idx] - X @ init.B0[:, idx]) @ Gamma[idx, k]
        rss[k] = r @ r
    kkt = np.array([o[2] for o in out])
    return McrFit(B, Gamma, rss / n, float(lambda1), float(lambda2), kkt)


def symmetrize_pattern(Gamma, rule="or", conflict="magnitude"):
    """Signed, symmetric edge pattern from the neighbourhood coefficients.

    ``rule="or"`` keeps an edge when either of ``gamma_sk``, ``gamma_ks`` is
    nonzero; ``"and"`` needs both.  The edge sign is ``-sign(gamma)``.  When
    both are nonzero with opposite signs, ``conflict="magnitude"`` follows the
    larger one and ``"strict"`` raises.
    """
    Gamma = np.asarray(Gamma, dtype=float)
    q = Gamma.shape[0]
    if Gamma.shape != (q, q):
        raise ValueError("Gamma must be square")
    if rule not in ("or", "and"):
        raise ValueError("rule must be 'or' or 'and'")
    if conflict not in ("magnitude", "strict"):
        raise ValueError("conflict must be 'magnitude' or 'strict'")
    G = Gamma.copy()
    np.fill_diagonal(G, 0.0)
    a, b = G, G.T
    nz_a, nz_b = a != 0, b != 0
    present = (nz_a | nz_b) if rule == "or" else (nz_a & nz_b)
    clash = nz_a & nz_b & (np.sign(a) != np.sign(b)) & present
    if conflict == "strict" and clash.any():
        pairs = [(int(s), int(k)) for s, k in zip(*np.nonzero(np.triu(clash, 1)))]
        raise ValueError(f"sign conflict between gamma_sk and gamma_ks at {pairs}")
    # follow the larger magnitude; an exact tie with opposite signs goes negative
    sgn = np.where(np.abs(a) >= np.abs(b), -np.sign(a), -np.sign(b))
    sgn[clash & (np.abs(a) == np.abs(b))] = -1
    signs = np.where(present, sgn, 0).astype(np.int8)
    np.fill_diagonal(signs, 1)
    return PrecisionPattern(signs)


def reconstruct_precision(Gamma, residual_variances, pattern):
    """Precision magnitudes from ``omega_kk = 1/s_k`` and ``omega_sk = -gamma_sk * omega_kk``."""
    Gamma = np.asarray(Gamma, dtype=float)
    s = np.asarray(residual_variances, dtype=float)
    if np.any(~(s > 0)):
        raise ValueError("residual variances must be positive")
    diag = 1.0 / s
    raw = -Gamma * diag[None, :]
    Omega = (raw + raw.T) / 2
    Omega[pattern.signs == 0] = 0.0
    np.fill_diagonal(Omega, diag)
    return Omega


class AmcrFitter:
    """Grid-search adaptor: scores every (lambda1, lambda2) cell."""

    name = "amcr"

    def __init__(self, init, threads=None, max_df=None):
        self.init = init
        self.threads = threads
        self.max_df = max_df
        self._regs = None

    def _regressions(self, X, Y):
        if self._regs is None:
            self._regs = conditional_regressions(X, Y, self.init, self.threads)
        return self._regs

    def surface(self, X, Y, grid, cfg, keep_fits=False):
        n = X.shape[0]
        regs = self._regressions(X, Y)
        l1, l2 = grid.lambda1_values, grid.lambda2_values

        def path(reg):
            return grid_path(reg.G, reg.c, reg.yy, reg.weights, reg.group, l1, l2,
                             cfg, keep=keep_fits, df_cap=self.max_df)

        paths = pmap(path, regs, self.threads)
        bad = [r.k for r, pth in zip(regs, paths) if not pth["converged"].all()]
        if bad:
            raise FitError(f"grid path did not converge for response {bad[0]}", k=bad[0])
        scores = np.zeros((l1.size, l2.size))
        for pth in paths:
            scores += tuning.bic_value(pth["rss"], pth["df"], n, self.max_df)
        fits = None
        if keep_fits:
            p, q = X.shape[1], Y.shape[1]
            fits = np.empty((l1.size, l2.size), dtype=object)
            for s in range(l1.size):
                for t in range(l2.size):
                    coefs = [reg.expand(pth["coefs"][s, t]) for reg, pth in zip(regs, paths)]
                    fits[s, t] = assemble(coefs, p, q)
        kkt = np.max([pth["kkt"] for pth in paths], axis=0) if paths else np.zeros_like(scores)
        return scores, fits, kkt

    def fit(self, X, Y, lambda1, lambda2, cfg):
        return fit_mcr(X, Y, lambda1, lambda2, self.init, cfg, self.threads,
                       regressions=self._regressions(X, Y))

    def score(self, X, Y, fit):
        return tuning.bic_score(X, Y, fit.B, fit.Gamma, self.init, self.max_df)



# initial-fit lambda used when none is given; see fit_initial_separate
DEFAULT_LAMBDA_INIT = 10.0


def default_max_df(n):
    """Cells where any regression keeps more than n/2 terms are not scored."""
    return max(1, n // 2)


def tune_amcr(X, Y, grid=None, cfg=None, threads=None, rule="or", lambda_init=DEFAULT_LAMBDA_INIT,
              gamma_source="residual", max_df="auto", keep_fits=False, init=None):
    """Initial fit, BIC grid search and the final aMCR fit in one call.

    ``lambda_init=None`` tunes each initial regression by BIC instead of
    using a fixed value.  ``rule`` is accepted for symmetry with
    ``tune_sep``; the pattern is formed by the caller.
    """
    X, Y = _check_xy(X, Y)
    cfg = cfg or SolverConfig()
    grid = grid or tuning.default_grid()
    if max_df == "auto":
        max_df = default_max_df(X.shape[0])
    if init is None:
        init = fit_initial_separate(X, Y, lambda_init, cfg, gamma_source, threads=threads,
                                    max_df=max_df)
    fitter = AmcrFitter(init, threads, max_df)
    res = tuning.grid_search(X, Y, grid, fitter, cfg, keep_fits)
    res.init = init
    return res
