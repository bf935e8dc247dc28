"""Estimation and support-recovery measures."""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .linalg import frobenius_norm, inf_norm, invert_spd, one_norm


@dataclass
class EstimationReport:
    frob: float
    one_norm: float
    inf_norm: float

    def as_dict(self):
        return asdict(self)


@dataclass
class SelectionReport:
    dist: float
    spe: float
    sen: float
    mcc: float
    tp: int
    tn: int
    fp: int
    fn: int

    def as_dict(self):
        return asdict(self)


def estimation_errors(B_hat, B_star):
    B_hat = np.asarray(B_hat, dtype=float)
    B_star = np.asarray(B_star, dtype=float)
    if B_hat.shape != B_star.shape:
        raise ValueError(f"shape mismatch: {B_hat.shape} vs {B_star.shape}")
    D = B_hat - B_star
    return EstimationReport(frobenius_norm(D), one_norm(D), inf_norm(D))


def confusion(est, truth):
    """TP, TN, FP, FN of two boolean masks of equal shape."""
    est = np.asarray(est, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if est.shape != truth.shape:
        raise ValueError("masks differ in shape")
    tp = int(np.sum(est & truth))
    fp = int(np.sum(est & ~truth))
    fn = int(np.sum(~est & truth))
    tn = int(est.size - tp - fp - fn)
    return tp, tn, fp, fn


def mcc_from_counts(tp, tn, fp, fn):
    den = (tp + fn) * (tn + fp) * (tp + fp) * (tn + fn)
    if den == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(den)


def selection_metrics(est_support, true_support, universe, dist_denominator=None):
    """Support-recovery scores of an estimated index set against the truth.

    ``universe`` is the number of candidate positions (TN fills the rest);
    ``dist_denominator`` overrides the normaliser of the symmetric difference
    (``q**2`` for the precision matrix, whose diagonal is not a candidate).
    Degenerate denominators give Spe = 1, Sen = 1, Mcc = 0.
    """
    if universe <= 0:
        raise ValueError("universe must be positive")
    est = set(est_support)
    true = set(true_support)
    tp = len(est & true)
    fp = len(est - true)
    fn = len(true - est)
    tn = universe - tp - fp - fn
    if tn < 0:
        raise ValueError("supports do not fit in the universe")
    denom = universe if dist_denominator is None else dist_denominator
    spe = tn / (tn + fp) if tn + fp else 1.0
    sen = tp / (tp + fn) if tp + fn else 1.0
    return SelectionReport((fp + fn) / denom, spe, sen, mcc_from_counts(tp, tn, fp, fn),
                           tp, tn, fp, fn)


def support_of(M):
    return {tuple(int(i) for i in ix) for ix in np.argwhere(np.asarray(M) != 0)}


def offdiag_support_of(M):
    M = np.asarray(M)
    return {(int(s), int(k)) for s, k in np.argwhere(M != 0) if s != k}


def coefficient_selection(B_hat, B_star):
    p, q = np.shape(B_star)
    return selection_metrics(support_of(B_hat), support_of(B_star), p * q)


def precision_selection(est_pattern, Omega_star):
    """Off-diagonal ordered pairs, scored over q(q-1) candidates; Dist over q^2."""
    signs = est_pattern.signs if hasattr(est_pattern, "signs") else np.asarray(est_pattern)
    q = signs.shape[0]
    return selection_metrics(offdiag_support_of(signs), offdiag_support_of(Omega_star),
                             q * (q - 1), dist_denominator=q * q)


def predictive_square_error(B_hat, X_test, Y_test, x_means, y_means):
    """Mean over test rows of ``||y_i - y_hat_i||^2``.

    Test data arrive uncentred and are centred with the training means.
    """
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    Y_test = np.atleast_2d(np.asarray(Y_test, dtype=float))
    if X_test.shape[0] == 0:
        raise ValueError("empty test set")
    R = (Y_test - y_means) - (X_test - x_means) @ B_hat
    return float(np.sum(R * R) / X_test.shape[0])


def conditional_variance(Sigma, k):
    """``sigma_kk - Sigma_{-k,k}' Sigma_{-k,-k}^{-1} Sigma_{-k,k}``."""
    Sigma = np.asarray(Sigma, dtype=float)
    q = Sigma.shape[0]
    if q == 1:
        return float(Sigma[0, 0])
    idx = np.delete(np.arange(q), k)
    s = Sigma[idx, k]
    return float(Sigma[k, k] - s @ np.linalg.solve(Sigma[np.ix_(idx, idx)], s))


def true_gamma(Omega):
    """``Gamma*[s, k] = -omega_sk / omega_kk`` with zero diagonal."""
    Omega = np.asarray(Omega, dtype=float)
    G = -Omega / np.diag(Omega)[None, :]
    np.fill_diagonal(G, 0.0)
    return G


def active_set(truth, k):
    """Indices of the nonzero entries of ``(beta*_k, gamma*_k)`` in M's coordinates.

    Covariate j maps to j, response s to ``p + s`` (s ranges over all q
    responses, s != k).
    """
    p, q = truth.B_star.shape
    beta = np.flatnonzero(truth.B_star[:, k])
    gamma = [s for s in range(q) if s != k and truth.Omega_star[s, k] != 0]
    return np.concatenate([beta, p + np.asarray(gamma, dtype=int)]).astype(int)


def asymptotic_se(truth, X, k, alpha):
    """Standard deviation scale ``s_k`` of the limiting normal law.

    ``s_k^2 = sigma~*_kk * alpha' M_AA^{-1} alpha`` with
    ``M = blockdiag(X'X/n, Sigma*)`` and A the true active set of response k.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    q = truth.Sigma_star.shape[0]
    A = active_set(truth, k)
    if A.size == 0:
        raise ValueError(f"response {k} has an empty active set")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (A.size,):
        raise ValueError(f"alpha must have length {A.size}")
    M = np.zeros((p + q, p + q))
    M[:p, :p] = X.T @ X / n
    M[p:, p:] = truth.Sigma_star
    MAA = M[np.ix_(A, A)]
    try:
        Minv = invert_spd(MAA)
    except np.linalg.LinAlgError as exc:
        raise ValueError("principal submatrix of M is singular") from exc
    sigma = conditional_variance(truth.Sigma_star, k)
    return float(np.sqrt(sigma * alpha @ Minv @ alpha))


def zeta_of(B, Gamma, k):
    """``(beta_k, gamma_k)`` laid out in M's coordinates (length p + q, slot p+k is 0)."""
    p = B.shape[0]
    q = Gamma.shape[0]
    z = np.zeros(p + q)
    z[:p] = B[:, k]
    g = Gamma[:, k].copy()
    g[k] = 0.0
    z[p:] = g
    return z


def standardized_statistic(B_hat, Gamma_hat, truth, X, k, alpha):
    """``sqrt(n) / s_k * alpha'(zeta_hat_A - zeta*_A)``."""
    n = X.shape[0]
    A = active_set(truth, k)
    G_star = true_gamma(truth.Omega_star)
    diff = zeta_of(B_hat, Gamma_hat, k)[A] - zeta_of(truth.B_star, G_star, k)[A]
    return float(np.sqrt(n) * (alpha @ diff) / asymptotic_se(truth, X, k, alpha))


def sign_recovered(B_hat, Gamma_hat, truth, k):
    """True when ``sign(zeta_hat_k) == sign(zeta*_k)`` coordinatewise."""
    G_star = true_gamma(truth.Omega_star)
    return bool(np.array_equal(np.sign(zeta_of(B_hat, Gamma_hat, k)),
                               np.sign(zeta_of(truth.B_star, G_star, k))))


def summarize(values):
    """Mean and standard error (sample sd / sqrt(R)) ignoring NaNs."""
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")
    return float(v.mean()), se
