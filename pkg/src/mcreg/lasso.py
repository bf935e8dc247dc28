"""Weighted Lasso by cyclic coordinate descent.

The objective is the un-normalised one,

    ||y - Z b||^2 + lam * sum_j w_j |b_j|,

so the coordinate update thresholds ``z_j' r`` at ``lam * w_j / 2``.  All the
work happens on the Gram matrix ``Z'Z`` and ``Z'y``: a single response is
refit many times along a tuning grid, and the design is reused every time.
Coordinates with an infinite weight are dropped before the Gram matrix is
formed and come back as exact zeros.
"""
from dataclasses import dataclass

import numba
import numpy as np


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-7
    max_sweeps: int = 10000
    rel_objective_tol: float = 1e-10
    standardize: bool = False
    polish: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.rel_objective_tol < 0:
            raise ValueError("rel_objective_tol must be nonnegative")


@dataclass
class LassoProblem:
    design: np.ndarray
    response: np.ndarray
    weights: np.ndarray
    lam: float

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        self.response = np.asarray(self.response, dtype=float).ravel()
        if self.design.ndim != 2:
            raise ValueError("design must be 2-D")
        n, m = self.design.shape
        if self.weights is None:
            self.weights = np.ones(m)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.response.shape[0] != n:
            raise ValueError(f"response has length {self.response.shape[0]}, design has {n} rows")
        if self.weights.shape[0] != m:
            raise ValueError(f"weights has length {self.weights.shape[0]}, design has {m} columns")
        if np.any(np.isnan(self.weights)) or np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")

    @property
    def penalties(self):
        """Per-coordinate penalty ``lam * w_j`` (``inf`` marks exclusion)."""
        with np.errstate(invalid="ignore"):
            pen = self.lam * self.weights
        # 0 * inf: an excluded coordinate stays excluded even at lam = 0
        pen[np.isinf(self.weights)] = np.inf
        return pen

    def objective(self, coef):
        r = self.response - self.design @ coef
        active = coef != 0
        return float(r @ r + np.sum(self.penalties[active] * np.abs(coef[active])))


class ConvergenceError(RuntimeError):
    def __init__(self, message, coef=None, max_violation=np.nan, index=None):
        super().__init__(message)
        self.coef = coef
        self.max_violation = max_violation
        self.index = index


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@numba.njit(cache=True, nogil=True)
def _objective(yy, c, beta, grad, pen):
    # ||y - Zb||^2 = yy - c'b - b'grad since grad = c - Gb
    val = yy
    for j in range(beta.shape[0]):
        b = beta[j]
        if b != 0.0:
            val += -c[j] * b - b * grad[j] + pen[j] * abs(b)
    return val


@numba.njit(cache=True, nogil=True)
def _kkt_violation(beta, grad, pen):
    worst = 0.0
    for j in range(beta.shape[0]):
        g2 = 2.0 * grad[j]
        if beta[j] > 0.0:
            v = abs(g2 - pen[j])
        elif beta[j] < 0.0:
            v = abs(g2 + pen[j])
        else:
            v = abs(g2) - pen[j]
        if v > worst:
            worst = v
    return worst


@numba.njit(cache=True, nogil=True)
def _sweep(G, beta, grad, pen, idx, nidx):
    """One cyclic pass over ``idx[:nidx]``; returns (max change, support changed)."""
    m = beta.shape[0]
    dmax = 0.0
    flipped = False
    for ii in range(nidx):
        j = idx[ii]
        gjj = G[j, j]
        if gjj <= 0.0:
            continue
        old = beta[j]
        new = _soft(grad[j] + gjj * old, 0.5 * pen[j]) / gjj
        delta = new - old
        if delta != 0.0:
            for i in range(m):
                grad[i] -= delta * G[i, j]
            beta[j] = new
            if (old == 0.0) != (new == 0.0):
                flipped = True
            if abs(delta) > dmax:
                dmax = abs(delta)
    return dmax, flipped


@numba.njit(cache=True, nogil=True)
def _polish(G, c, beta, grad, pen):
    """Solve the smooth problem on the current signed support exactly.

    Accepted only if signs survive and the KKT residual goes down.
    """
    m = beta.shape[0]
    na = 0
    for j in range(m):
        if beta[j] != 0.0:
            na += 1
    if na == 0:
        return
    act = np.empty(na, dtype=np.int64)
    k = 0
    for j in range(m):
        if beta[j] != 0.0:
            act[k] = j
            k += 1
    L = np.zeros((na, na))
    rhs = np.empty(na)
    for a in range(na):
        j = act[a]
        s = 1.0 if beta[j] > 0.0 else -1.0
        rhs[a] = c[j] - 0.5 * pen[j] * s
        for b in range(na):
            L[a, b] = G[j, act[b]]
    # in-place Cholesky
    for jj in range(na):
        d = L[jj, jj]
        for kk in range(jj):
            d -= L[jj, kk] * L[jj, kk]
        if d <= 1e-12 * (1.0 + abs(L[jj, jj])):
            return
        d = np.sqrt(d)
        L[jj, jj] = d
        for ii in range(jj + 1, na):
            s = L[ii, jj]
            for kk in range(jj):
                s -= L[ii, kk] * L[jj, kk]
            L[ii, jj] = s / d
    sol = rhs.copy()
    for ii in range(na):
        s = sol[ii]
        for kk in range(ii):
            s -= L[ii, kk] * sol[kk]
        sol[ii] = s / L[ii, ii]
    for ii in range(na - 1, -1, -1):
        s = sol[ii]
        for kk in range(ii + 1, na):
            s -= L[kk, ii] * sol[kk]
        sol[ii] = s / L[ii, ii]
    for a in range(na):
        if (sol[a] > 0.0) != (beta[act[a]] > 0.0) or sol[a] == 0.0:
            return
    new_beta = beta.copy()
    for a in range(na):
        new_beta[act[a]] = sol[a]
    new_grad = c.copy()
    for a in range(na):
        j = act[a]
        b = sol[a]
        for i in range(m):
            new_grad[i] -= G[i, j] * b
    if _kkt_violation(new_beta, new_grad, pen) < _kkt_violation(beta, grad, pen):
        beta[:] = new_beta
        grad[:] = new_grad


@numba.njit(cache=True, nogil=True)
def _cd(G, c, yy, pen, beta, tol, rel_tol, max_sweeps, polish, trace):
    """Coordinate descent in place on ``beta``.

    Alternates full sweeps with sweeps restricted to the active set.  Declares
    convergence only on a full sweep that leaves the support unchanged and
    either moves no coordinate by ``tol`` or lowers the objective by less than
    ``rel_tol`` relative.  Writes the objective after each sweep to ``trace``
    (if it is long enough).  Returns (sweeps used, converged flag, grad).
    """
    m = beta.shape[0]
    grad = c.copy()
    for j in range(m):
        b = beta[j]
        if b != 0.0:
            for i in range(m):
                grad[i] -= G[i, j] * b
    all_idx = np.arange(m)
    act = np.empty(m, dtype=np.int64)
    obj_old = _objective(yy, c, beta, grad, pen)
    sweeps = 0
    converged = False
    ntrace = trace.shape[0]
    while sweeps < max_sweeps:
        dmax, flipped = _sweep(G, beta, grad, pen, all_idx, m)
        obj = _objective(yy, c, beta, grad, pen)
        if sweeps < ntrace:
            trace[sweeps] = obj
        sweeps += 1
        small = dmax < tol or (obj_old - obj) <= rel_tol * abs(obj)
        obj_old = obj
        if small and not flipped:
            converged = True
            break
        while sweeps < max_sweeps:
            na = 0
            for j in range(m):
                if beta[j] != 0.0:
                    act[na] = j
                    na += 1
            dmax, flipped = _sweep(G, beta, grad, pen, act, na)
            obj = _objective(yy, c, beta, grad, pen)
            if sweeps < ntrace:
                trace[sweeps] = obj
            sweeps += 1
            small = dmax < tol or (obj_old - obj) <= rel_tol * abs(obj)
            obj_old = obj
            if small:
                break
    if polish:
        _polish(G, c, beta, grad, pen)
    return sweeps, converged, grad


@numba.njit(cache=True, nogil=True)
def _grid_path(G, c, yy, w, group, lam_rows, lam_cols, tol, rel_tol, max_sweeps,
               polish, keep, df_cap):
    """Fit every cell of a two-penalty grid for one response.

    ``group[j]`` is 0 when coordinate j is penalised by the row lambda and 1
    for the column lambda.  Rows and columns are visited from the largest
    lambda down; each cell warm-starts from its left neighbour in visiting
    order and each row from the first cell of the previous row.

    With ``df_cap >= 0`` a row stops once a cell has more than ``df_cap``
    nonzeros, and when that happens at the first cell of a row all later
    rows are dropped too.  Skipped cells have ``rss = nan``.  This assumes
    the fit grows as lambda shrinks, which holds along the path up to the
    odd small wiggle.

    Returns rss, df, converged, kkt, skipped and (if ``keep``) the
    coefficients, all indexed by position in ``lam_rows``/``lam_cols``.
    """
    m = c.shape[0]
    nr = lam_rows.shape[0]
    nc = lam_cols.shape[0]
    rss = np.empty((nr, nc))
    df = np.zeros((nr, nc), dtype=np.int64)
    conv = np.ones((nr, nc), dtype=np.bool_)
    kkt = np.zeros((nr, nc))
    skipped = np.zeros((nr, nc), dtype=np.bool_)
    coefs = np.zeros((nr if keep else 0, nc if keep else 0, m))
    pen = np.empty(m)
    beta = np.zeros(m)
    row_start = np.zeros(m)
    trace = np.empty(0)
    zero_pen = np.zeros(m)
    rows_over = False
    for rr in range(nr - 1, -1, -1):
        beta[:] = row_start
        over = rows_over
        for cc in range(nc - 1, -1, -1):
            if over:
                skipped[rr, cc] = True
                rss[rr, cc] = np.nan
                df[rr, cc] = df_cap + 1
                continue
            for j in range(m):
                pen[j] = (lam_rows[rr] if group[j] == 0 else lam_cols[cc]) * w[j]
            _, ok, grad = _cd(G, c, yy, pen, beta, tol, rel_tol, max_sweeps,
                              polish, trace)
            conv[rr, cc] = ok
            rss[rr, cc] = _objective(yy, c, beta, grad, zero_pen)
            kkt[rr, cc] = _kkt_violation(beta, grad, pen)
            d = 0
            for j in range(m):
                if beta[j] != 0.0:
                    d += 1
            df[rr, cc] = d
            if keep:
                coefs[rr, cc, :] = beta
            if cc == nc - 1:
                row_start[:] = beta
            if df_cap >= 0 and d > df_cap:
                over = True
                if cc == nc - 1:
                    rows_over = True
    return rss, df, conv, kkt, skipped, coefs


# ---------------------------------------------------------------------------
# python surface


# columns whose squared norm is this small relative to the largest are
# treated as exactly zero (centering roundoff leaves ~1e-30)
NULL_COLUMN_TOL = 1e-20


def _live_columns(G, mask):
    """Indices in ``mask`` whose Gram diagonal is not numerically zero."""
    d = np.diag(G)
    top = np.max(d[mask]) if np.any(mask) else 0.0
    return np.flatnonzero(mask & (d > NULL_COLUMN_TOL * top))


def solve_gram(G, c, yy, pen, cfg=None, warm_start=None, trace=None):
    """Weighted Lasso from sufficient statistics.

    ``pen`` holds ``lam * w_j`` per coordinate, ``inf`` for excluded ones.
    Returns ``(coef, grad)`` with ``grad = c - G @ coef``.
    """
    cfg = cfg or SolverConfig()
    m = c.shape[0]
    keep = _live_columns(G, np.isfinite(pen))
    coef = np.zeros(m)
    if keep.size == 0:
        return coef, c.copy()
    Gk = np.ascontiguousarray(G[np.ix_(keep, keep)])
    ck = np.ascontiguousarray(c[keep])
    pk = np.ascontiguousarray(pen[keep])
    beta = np.zeros(keep.size) if warm_start is None else np.array(warm_start, dtype=float)[keep]
    tr = np.empty(0) if trace is None else trace
    sweeps, ok, _ = _cd(Gk, ck, float(yy), pk, beta, cfg.tol, cfg.rel_objective_tol,
                        cfg.max_sweeps, cfg.polish, tr)
    coef[keep] = beta
    grad = c - G[:, keep] @ beta
    if not ok:
        raise ConvergenceError(
            f"coordinate descent did not converge in {cfg.max_sweeps} sweeps",
            coef=coef, max_violation=kkt_violation(coef, grad, pen),
        )
    return coef, grad


def solve_weighted_lasso(prob, cfg=None, warm_start=None):
    """Minimise ``||y - Z b||^2 + lam * sum w_j |b_j|`` by coordinate descent."""
    cfg = cfg or SolverConfig()
    Z, y = prob.design, prob.response
    m = Z.shape[1]
    if warm_start is not None and np.shape(warm_start) != (m,):
        raise ValueError(f"warm_start must have length {m}")
    scale = np.ones(m)
    if cfg.standardize:
        norms = np.sqrt(np.sum(Z * Z, axis=0))
        scale = np.where(norms > 0, norms, 1.0)
        Z = Z / scale
        if warm_start is not None:
            warm_start = np.asarray(warm_start) * scale
    G = Z.T @ Z
    c = Z.T @ y
    coef, _ = solve_gram(G, c, float(y @ y), prob.penalties, cfg, warm_start)
    return coef / scale


def kkt_violation(coef, grad, pen):
    """Largest KKT residual (``inf`` if an excluded coordinate is nonzero)."""
    fin = np.isfinite(pen)
    if np.any(coef[~fin] != 0):
        return np.inf
    if not np.any(fin):
        return 0.0
    return float(_kkt_violation(coef[fin], grad[fin], pen[fin]))


def kkt_check(prob, coef, tol):
    """Coordinates violating the stationarity conditions by more than ``tol``.

    Returns a list of ``(index, violation)``; empty means ``coef`` is optimal
    up to ``tol``.
    """
    coef = np.asarray(coef, dtype=float)
    if coef.shape != (prob.design.shape[1],):
        raise ValueError("coef has the wrong length")
    g2 = 2.0 * (prob.design.T @ (prob.response - prob.design @ coef))
    pen = prob.penalties
    out = []
    for j in range(coef.shape[0]):
        if not np.isfinite(pen[j]):
            if coef[j] != 0:
                out.append((j, np.inf))
            continue
        if coef[j] != 0:
            v = abs(g2[j] - pen[j] * np.sign(coef[j]))
        else:
            v = abs(g2[j]) - pen[j]
        if v > tol:
            out.append((j, float(v)))
    return out


def grid_path(G, c, yy, weights, group, lam_rows, lam_cols, cfg=None, keep=False,
              df_cap=None):
    """Evaluate one response over a two-penalty grid (see ``_grid_path``).

    ``weights`` may contain ``inf``; those coordinates are dropped.  Returns a
    dict with ``rss``, ``df``, ``converged``, ``kkt``, ``skipped`` and, with
    ``keep``, ``coefs`` of shape (rows, cols, m).  ``df_cap`` ends each row
    early once the fit has more than ``df_cap`` nonzeros; skipped cells have
    ``rss = nan``.
    """
    cfg = cfg or SolverConfig()
    m = c.shape[0]
    keep_idx = _live_columns(G, np.isfinite(weights))
    lam_rows = np.asarray(lam_rows, dtype=float)
    lam_cols = np.asarray(lam_cols, dtype=float)
    shape = (lam_rows.size, lam_cols.size)
    if keep_idx.size == 0:
        out = dict(rss=np.full(shape, float(yy)), df=np.zeros(shape, dtype=np.int64),
                   converged=np.ones(shape, dtype=bool), kkt=np.zeros(shape),
                   skipped=np.zeros(shape, dtype=bool))
        if keep:
            out["coefs"] = np.zeros(shape + (m,))
        return out
    Gk = np.ascontiguousarray(G[np.ix_(keep_idx, keep_idx)])
    rss, df, conv, kkt, skipped, coefs = _grid_path(
        Gk, np.ascontiguousarray(c[keep_idx]), float(yy),
        np.ascontiguousarray(weights[keep_idx], dtype=float),
        np.ascontiguousarray(group[keep_idx], dtype=np.int64),
        lam_rows, lam_cols, cfg.tol, cfg.rel_objective_tol, cfg.max_sweeps,
        cfg.polish, keep, -1 if df_cap is None else int(df_cap),
    )
    out = dict(rss=rss, df=df, converged=conv, kkt=kkt, skipped=skipped)
    if keep:
        full = np.zeros(shape + (m,))
        full[:, :, keep_idx] = coefs
        out["coefs"] = full
    return out
