import numpy as np
import pytest

from mcreg import baselines, simgen
from mcreg.baselines import SepFitter, fit_sep, tune_sep
from mcreg.lasso import LassoProblem, solve_weighted_lasso
from mcreg.metrics import precision_selection


@pytest.fixture(scope="module")
def data():
    return simgen.gen_dataset(simgen.ModelSpec(6, 4, 120, 2.0, 1.5, seed=2))


def test_huge_lambdas(data):
    ds, _ = data
    fit = fit_sep(ds.X, ds.Y, 1e9, 1e9)
    assert np.all(fit.B == 0)
    assert np.array_equal(fit.pattern.signs, np.eye(4))


def test_single_response():
    ds, _ = simgen.gen_dataset(simgen.ModelSpec(6, 1, 80, 2.0, 0.0, seed=3))
    fit = fit_sep(ds.X, ds.Y, 4.0, 1.0)
    assert fit.pattern.signs.shape == (1, 1) and fit.pattern.signs[0, 0] == 1
    direct = solve_weighted_lasso(LassoProblem(ds.X, ds.Y[:, 0], np.ones(6), 4.0))
    assert np.allclose(fit.B[:, 0], direct, atol=1e-12)


def test_coefficient_stage_sees_only_own_response(data, monkeypatch):
    ds, _ = data
    seen = []
    real = baselines._coef_stage

    def spy(x_stats, y_col, yy, lam, cfg):
        seen.append((x_stats.shape, y_col.shape))
        return real(x_stats, y_col, yy, lam, cfg)

    monkeypatch.setattr(baselines, "_coef_stage", spy)
    fit = fit_sep(ds.X, ds.Y, 3.0, 5.0)
    assert seen and all(s == ((6, 6), (6,)) for s in seen)
    # scrambling the other responses leaves beta_0 untouched
    Y2 = ds.Y.copy()
    Y2[:, 1:] = np.random.default_rng(0).normal(size=(120, 3))
    assert np.array_equal(fit_sep(ds.X, Y2, 3.0, 5.0).B[:, 0], fit.B[:, 0])


def test_neighbourhood_on_residuals(data):
    ds, _ = data
    fit = fit_sep(ds.X, ds.Y, 3.0, 5.0)
    R = ds.Y - ds.X @ fit.B
    for k in range(4):
        idx = [s for s in range(4) if s != k]
        g = solve_weighted_lasso(LassoProblem(R[:, idx], R[:, k], np.ones(3), 5.0))
        assert np.allclose(fit.Gamma[idx, k], g, atol=1e-9)


def test_patterns_symmetric(data):
    ds, _ = data
    for rule in ("or", "and"):
        s = fit_sep(ds.X, ds.Y, 1.0, 1.0, rule=rule).pattern.signs
        assert np.array_equal(s, s.T)


def test_independent_responses_specificity():
    ds, truth = simgen.gen_dataset(simgen.ModelSpec(10, 5, 500, 3.0, 0.0, seed=11))
    assert np.array_equal(truth.Omega_star, np.eye(5))
    res = tune_sep(ds.X, ds.Y)
    assert precision_selection(res.best_fit.pattern, truth.Omega_star).spe >= 0.9


def test_modes_agree_on_small_instance():
    ds, _ = simgen.gen_dataset(simgen.preset(3, seed=0))
    a = tune_sep(ds.X, ds.Y, mode="joint")
    b = tune_sep(ds.X, ds.Y, mode="sequential")
    assert (a.best_lambda1, a.best_lambda2) == (b.best_lambda1, b.best_lambda2)
    with pytest.raises(ValueError):
        SepFitter(mode="other")


def test_parallel_identical(data):
    ds, _ = data
    a = fit_sep(ds.X, ds.Y, 1.0, 2.0, threads=1)
    b = fit_sep(ds.X, ds.Y, 1.0, 2.0, threads=4)
    assert a.B.tobytes() == b.B.tobytes() and a.Gamma.tobytes() == b.Gamma.tobytes()
