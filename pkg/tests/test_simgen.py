import numpy as np
import pytest

from mcreg import simgen
from mcreg.linalg import cholesky_lower


def test_presets():
    m = simgen.model_presets()
    assert len(m) == 6
    assert (m[0].p, m[0].q, m[0].n) == (100, 100, 250)
    assert m[0].b_prob == pytest.approx(3 / 100) and m[0].omega_prob == pytest.approx(2 / 100)
    assert (m[2].p, m[2].q, m[2].n) == (10, 25, 250)
    assert (m[5].p, m[5].q, m[5].n) == (200, 400, 150)
    assert [(s.b_nonzero_expect, s.omega_nonzero_expect) for s in m] == [
        (3.0, 2.0), (4.0, 2.0), (3.5, 2.0), (20.0, 1.5), (25.0, 1.5), (20.0, 2.5)]
    with pytest.raises(ValueError):
        simgen.preset(7)
    assert simgen.preset(3, seed=9).seed == 9


def test_spec_validation():
    with pytest.raises(ValueError):
        simgen.ModelSpec(0, 2, 10, 0.0, 0.0)
    with pytest.raises(ValueError):
        simgen.ModelSpec(2, 2, 10, 3.0, 0.0)


def test_precision_prob_zero_is_identity():
    assert np.array_equal(simgen.gen_precision(7, 0.0, np.random.default_rng(0)), np.eye(7))


def test_row_sums_two_thirds():
    rng = np.random.default_rng(1)
    for q in (3, 10, 25):
        A = simgen.scaled_offdiagonal(q, 0.3, rng)
        sums = np.abs(A).sum(axis=1)
        nz = sums > 0
        assert np.allclose(sums[nz], 2 / 3, rtol=0, atol=1e-15)
        assert np.all(np.diag(A) == 0)


def test_precision_structure_and_spd():
    Omega = simgen.gen_precision(25, 2 / 25, np.random.default_rng(2))
    assert np.array_equal(Omega, Omega.T)
    assert np.all(np.diag(Omega) == 1)
    cholesky_lower(Omega)
    assert np.linalg.eigvalsh(Omega).min() > 0


def test_averaging_row_sum_bound():
    # after averaging, row i sums to (row i of A + column i of A) / 2; the
    # column part is not capped, so rows can exceed 2/3
    rng = np.random.default_rng(12)
    A = simgen.scaled_offdiagonal(25, 2 / 25, rng)
    Omega = (A + A.T) / 2
    np.fill_diagonal(Omega, 1.0)
    off = np.abs(Omega).sum(axis=1) - 1
    assert np.all(off <= (2 / 3 + np.abs(A).sum(axis=0)) / 2 + 1e-12)


def test_coefficients():
    rng = np.random.default_rng(3)
    assert np.all(simgen.gen_coefficients(4, 5, 0.0, 0.5, rng) == 0)
    B = simgen.gen_coefficients(4, 5, 1.0, 1.0, rng)
    assert set(np.unique(B)) <= {-1.0, 1.0}
    B = simgen.gen_coefficients(30, 30, 0.5, 0.3, rng)
    mag = np.abs(B[B != 0])
    assert mag.min() >= 0.3 and mag.max() <= 1.0
    with pytest.raises(ValueError):
        simgen.gen_coefficients(2, 2, 0.5, 1.5, rng)


def test_coefficient_rate_in_binomial_band():
    B = simgen.gen_coefficients(10, 25, 3.5 / 10, 0.5, np.random.default_rng(4))
    m = B.size
    sd = np.sqrt(0.35 * 0.65 / m)
    assert abs(np.count_nonzero(B) / m - 0.35) <= 3 * sd


def test_determinism_bit_identical():
    spec = simgen.preset(3, seed=42)
    a, ta = simgen.gen_dataset(spec)
    b, tb = simgen.gen_dataset(spec)
    for u, v in [(a.X, b.X), (a.Y, b.Y), (ta.B_star, tb.B_star), (ta.Omega_star, tb.Omega_star)]:
        assert u.tobytes() == v.tobytes()
    c, _ = simgen.gen_dataset(spec.with_seed(43))
    assert not np.array_equal(a.Y, c.Y)


def test_x_draw_independent_of_q():
    a, _ = simgen.gen_dataset(simgen.ModelSpec(6, 4, 50, 2.0, 1.0, seed=5))
    b, _ = simgen.gen_dataset(simgen.ModelSpec(6, 9, 50, 2.0, 1.0, seed=5))
    assert np.array_equal(a.raw()[0], b.raw()[0])


def test_dataset_truth_links():
    ds, truth = simgen.gen_dataset(simgen.preset(3, seed=1))
    assert np.allclose(ds.X.mean(0), 0, atol=1e-12) and np.allclose(ds.Y.mean(0), 0, atol=1e-12)
    assert set(np.unique(ds.raw()[0])) <= {0.0, 1.0}
    assert np.max(np.abs(truth.Sigma_star @ truth.Omega_star - np.eye(25))) < 1e-10
    nz = np.abs(truth.Omega_star[truth.Omega_star != 0])
    assert truth.v_min == nz.min()
    mag = np.abs(truth.B_star[truth.B_star != 0])
    assert mag.min() >= truth.v_min


def test_noiseless_conditional_mean():
    spec = simgen.ModelSpec(8, 4, 200, 3.0, 1.0, seed=6)
    ds, truth = simgen.gen_dataset(spec, noise_scale=0.0)
    X, Y = ds.raw()
    assert np.allclose(Y, X @ truth.B_star, rtol=0, atol=1e-12)
    B = np.linalg.lstsq(ds.X, ds.Y, rcond=None)[0]
    assert np.max(np.abs(B - truth.B_star)) < 1e-3


def test_single_row_warns():
    with pytest.warns(RuntimeWarning, match="n = 1"):
        ds, _ = simgen.gen_dataset(simgen.ModelSpec(3, 2, 1, 1.0, 1.0))
    assert np.all(ds.X == 0) and np.all(ds.Y == 0)


def test_residual_covariance_converges():
    # q = 5 shrunken variant of Model 3 with n = 1e4
    spec = simgen.ModelSpec(10, 5, 10_000, 3.5, 2.0 * 5 / 25, seed=7)
    ds, truth = simgen.gen_dataset(spec)
    X, Y = ds.raw()
    E = Y - X @ truth.B_star
    S = E.T @ E / spec.n
    assert np.max(np.abs(S - truth.Sigma_star)) <= 3 / np.sqrt(spec.n)
