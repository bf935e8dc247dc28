"""BIC tuning over a logarithmic (lambda1, lambda2) grid."""
from dataclasses import dataclass
from typing import Any

import numpy as np


class TuningError(RuntimeError):
    pass


@dataclass
class TuningGrid:
    lambda1_values: np.ndarray
    lambda2_values: np.ndarray

    def __post_init__(self):
        for name in ("lambda1_values", "lambda2_values"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if v.size == 0:
                raise ValueError(f"{name} is empty")
            if np.any(v <= 0) or np.any(np.diff(v) <= 0):
                raise ValueError(f"{name} must be positive and strictly increasing")
            setattr(self, name, v)

    @property
    def shape(self):
        return self.lambda1_values.size, self.lambda2_values.size


@dataclass
class TuningResult:
    best_lambda1: float
    best_lambda2: float
    best_index: tuple
    score_surface: np.ndarray
    best_fit: Any
    fits: Any = None
    kkt_surface: np.ndarray = None


def log_grid(size=19):
    """``10**(-3 + (s - 1)/3)`` for ``s = 1..size``."""
    return 10.0 ** (-3.0 + np.arange(size) / 3.0)


def default_grid():
    v = log_grid()
    return TuningGrid(v, v.copy())


def bic_value(rss, df, n, max_df=None, penalty=None):
    """``n log(RSS/n) + log(n) df`` elementwise.

    ``penalty`` replaces the per-df cost ``log(n)`` (2 gives AIC).

    Cells with ``RSS <= 0`` (log undefined) or with ``df > max_df`` score
    ``+inf`` so they can never be selected.
    """
    rss = np.asarray(rss, dtype=float)
    df = np.asarray(df)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = n * np.log(rss / n) + (np.log(n) if penalty is None else penalty) * df
    out = np.where(rss > 0, out, np.inf)
    if max_df is not None:
        out = np.where(df > max_df, np.inf, out)
    return out


def argmin_cell(scores):
    """Index of the smallest score; ties go to the largest (row, col) index.

    Grid axes are increasing, so this prefers the sparser fit.
    """
    scores = np.asarray(scores, dtype=float)
    if not np.any(np.isfinite(scores)):
        raise TuningError("every grid cell is degenerate")
    best = np.min(scores)
    hits = np.argwhere(scores == best)
    return tuple(int(i) for i in max(map(tuple, hits)))


def argmin_1d(scores):
    return argmin_cell(np.asarray(scores)[:, None])[0]


def bic_score(X, Y, B, Gamma, init, max_df=None):
    """BIC of an aMCR fit, summed over the q conditional regressions.

    RSS_k is the residual sum of squares of regression k; df_k counts the
    nonzeros of ``beta_k`` and ``gamma_k`` before any symmetrisation.
    """
    from .mcr import build_augmented_design

    n = X.shape[0]
    q = Y.shape[1]
    total = 0.0
    for k in range(q):
        Z = build_augmented_design(X, Y, init.B0, k)
        zeta = np.concatenate([B[:, k], np.delete(Gamma[:, k], k)])
        r = Y[:, k] - Z @ zeta
        rss = float(r @ r)
        if rss <= 0:
            raise TuningError(f"degenerate fit: RSS is zero for response {k}")
        total += float(bic_value(rss, np.count_nonzero(zeta), n, max_df))
    return total


def grid_search(X, Y, grid, fitter, cfg=None, keep_fits=False):
    """Exhaustive BIC search; ``fitter`` supplies the score surface and the refit.

    ``fitter`` needs ``surface(X, Y, grid, cfg, keep_fits)`` returning
    ``(scores, fits, kkt)`` and ``fit(X, Y, lambda1, lambda2, cfg)``.
    """
    from .lasso import SolverConfig

    cfg = cfg or SolverConfig()
    scores, fits, kkt = fitter.surface(X, Y, grid, cfg, keep_fits)
    s, t = argmin_cell(scores)
    l1 = float(grid.lambda1_values[s])
    l2 = float(grid.lambda2_values[t])
    best = fitter.fit(X, Y, l1, l2, cfg)
    return TuningResult(l1, l2, (s, t), scores, best, fits, kkt)
