"""Seeded simulation designs for sparse multivariate regression.

Every dataset draws from four independent PCG64 streams (precision,
coefficients, covariates, noise) spawned from one ``SeedSequence``, so e.g.
the covariate draw does not depend on ``q``.
"""
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .linalg import center_columns, cholesky_lower, invert_spd


@dataclass(frozen=True)
class ModelSpec:
    p: int
    q: int
    n: int
    b_nonzero_expect: float
    omega_nonzero_expect: float
    seed: int = 0

    def __post_init__(self):
        if min(self.p, self.q, self.n) < 1:
            raise ValueError("p, q and n must be positive")
        if not 0 <= self.b_prob <= 1:
            raise ValueError(f"P(B != 0) = {self.b_prob} is not a probability")
        if not 0 <= self.omega_prob <= 1:
            raise ValueError(f"P(Omega != 0) = {self.omega_prob} is not a probability")

    @property
    def b_prob(self):
        return self.b_nonzero_expect / self.p

    @property
    def omega_prob(self):
        return self.omega_nonzero_expect / self.q

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass
class Dataset:
    """Centred data plus the column means that were removed."""
    X: np.ndarray
    Y: np.ndarray
    x_means: np.ndarray
    y_means: np.ndarray

    @property
    def n(self):
        return self.X.shape[0]

    def raw(self):
        return self.X + self.x_means, self.Y + self.y_means


@dataclass
class GroundTruth:
    B_star: np.ndarray
    Omega_star: np.ndarray
    Sigma_star: np.ndarray
    v_min: float


def model_presets():
    """The six benchmark configurations, Models 1-6 in order."""
    return [
        ModelSpec(100, 100, 250, 3.0, 2.0),
        ModelSpec(50, 50, 250, 4.0, 2.0),
        ModelSpec(10, 25, 250, 3.5, 2.0),
        ModelSpec(200, 1000, 250, 20.0, 1.5),
        ModelSpec(200, 800, 250, 25.0, 1.5),
        ModelSpec(200, 400, 150, 20.0, 2.5),
    ]


def preset(model, seed=0):
    """Model ``model`` (1-based) with the given seed."""
    presets = model_presets()
    if not 1 <= model <= len(presets):
        raise ValueError(f"model must be in 1..{len(presets)}, got {model}")
    return presets[model - 1].with_seed(seed)


def streams(seed):
    """Independent generators for (precision, coefficients, covariates, noise)."""
    children = np.random.SeedSequence(int(seed)).spawn(4)
    return tuple(np.random.Generator(np.random.PCG64(s)) for s in children)


def _signed_uniform(rng, shape, low):
    mag = rng.uniform(low, 1.0, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return sign * mag


def scaled_offdiagonal(q, prob, rng):
    """Row-scaled off-diagonal draw before symmetrisation.

    Entries are Bern(prob) * U([-1, -0.5] u [0.5, 1]); each nonempty row is
    divided by 1.5 times its absolute sum, so it sums to 2/3 in absolute value.
    """
    if not 0 <= prob <= 1:
        raise ValueError("prob must lie in [0, 1]")
    mask = rng.random((q, q)) < prob
    A = np.where(mask, _signed_uniform(rng, (q, q), 0.5), 0.0)
    np.fill_diagonal(A, 0.0)
    rowsum = np.abs(A).sum(axis=1)
    nz = rowsum > 0
    A[nz] /= 1.5 * rowsum[nz, None]
    return A


def gen_precision(q, prob, rng):
    A = scaled_offdiagonal(q, prob, rng)
    Omega = (A + A.T) / 2
    np.fill_diagonal(Omega, 1.0)
    return Omega


def gen_coefficients(p, q, prob, v_min, rng):
    if not 0 < v_min <= 1:
        raise ValueError(f"v_min must lie in (0, 1], got {v_min}")
    if not 0 <= prob <= 1:
        raise ValueError("prob must lie in [0, 1]")
    mask = rng.random((p, q)) < prob
    return np.where(mask, _signed_uniform(rng, (p, q), v_min), 0.0)


def min_nonzero_magnitude(M):
    nz = np.abs(M[M != 0])
    return float(nz.min()) if nz.size else 1.0


def gen_truth(spec, rngs=None):
    rng_omega, rng_b, _, _ = rngs or streams(spec.seed)
    Omega = gen_precision(spec.q, spec.omega_prob, rng_omega)
    Sigma = invert_spd(Omega)
    v_min = min_nonzero_magnitude(Omega)
    B = gen_coefficients(spec.p, spec.q, spec.b_prob, v_min, rng_b)
    return GroundTruth(B, Omega, Sigma, v_min)


def sample_data(truth, n, rng_x, rng_noise, noise_scale=1.0):
    """Draw (X, Y) uncentred: X ~ Bern(1/2), Y = X B* + E with rows of E ~ N(0, Sigma*)."""
    p, q = truth.B_star.shape
    X = (rng_x.random((n, p)) < 0.5).astype(float)
    L = cholesky_lower(truth.Sigma_star)
    Z = rng_noise.standard_normal((n, q))
    Y = X @ truth.B_star + noise_scale * (Z @ L.T)
    return X, Y


def make_dataset(X, Y):
    if X.shape[0] == 1:
        warnings.warn("n = 1: centred data are identically zero", RuntimeWarning, stacklevel=2)
    Xc, xm = center_columns(X)
    Yc, ym = center_columns(Y)
    return Dataset(Xc, Yc, xm, ym)


def gen_dataset(spec, noise_scale=1.0):
    """Generate ``(Dataset, GroundTruth)`` for ``spec``.

    ``noise_scale`` multiplies the Gaussian noise; 0 gives the exact
    conditional mean.
    """
    rngs = streams(spec.seed)
    truth = gen_truth(spec, rngs)
    X, Y = sample_data(truth, spec.n, rngs[2], rngs[3], noise_scale)
    return make_dataset(X, Y), truth
