import numpy as np
import pytest

from mcreg import simgen
from mcreg.lasso import SolverConfig, kkt_check, LassoProblem
from mcreg.mcr import AmcrFitter, build_augmented_design, compute_adaptive_weights, fit_mcr, tune_amcr
from mcreg.tuning import (TuningError, TuningGrid, argmin_cell, bic_score, bic_value,
                          default_grid, grid_search, log_grid)


def test_default_grid_values():
    g = default_grid()
    assert g.shape == (19, 19)
    v = g.lambda1_values
    assert v[0] == pytest.approx(1e-3, rel=1e-15)
    assert v[-1] == pytest.approx(1e3, rel=1e-15)
    assert v[9] == 1.0
    assert np.allclose(np.log10(v), -3 + np.arange(19) / 3)


def test_grid_validation():
    with pytest.raises(ValueError):
        TuningGrid([1.0, 0.5], [1.0])
    with pytest.raises(ValueError):
        TuningGrid([], [1.0])
    with pytest.raises(ValueError):
        TuningGrid([-1.0], [1.0])


def test_bic_value():
    assert bic_value(100.0, 0, 100) == pytest.approx(0.0)
    assert bic_value(100.0, 3, 100) == pytest.approx(3 * np.log(100))
    assert bic_value(0.0, 0, 10) == np.inf
    assert bic_value(1.0, 6, 10, max_df=5) == np.inf


def test_argmin_ties_and_errors():
    s = np.full((3, 3), 5.0)
    s[0, 2] = s[2, 0] = 1.0
    assert argmin_cell(s) == (2, 0)
    s[2, 1] = 1.0
    assert argmin_cell(s) == (2, 1)
    with pytest.raises(TuningError):
        argmin_cell(np.full((2, 2), np.inf))


class _Constructed:
    """Fitter stub with a prescribed score surface."""

    def __init__(self, scores):
        self.scores = scores
        self.calls = []

    def surface(self, X, Y, grid, cfg, keep_fits=False):
        return self.scores, None, None

    def fit(self, X, Y, l1, l2, cfg):
        self.calls.append((l1, l2))
        return (l1, l2)


def test_grid_search_constructed_minimum():
    g = default_grid()
    s = np.add.outer((np.arange(19) - 4.0) ** 2, (np.arange(19) - 6.0) ** 2)
    res = grid_search(None, None, g, _Constructed(s))
    assert res.best_index == (4, 6)
    assert res.best_lambda1 == g.lambda1_values[4] and res.best_lambda2 == g.lambda2_values[6]
    assert res.best_fit == (res.best_lambda1, res.best_lambda2)


def test_grid_search_single_cell_and_degenerate():
    g = TuningGrid([2.0], [3.0])
    assert grid_search(None, None, g, _Constructed(np.array([[7.0]]))).best_fit == (2.0, 3.0)
    with pytest.raises(TuningError):
        grid_search(None, None, g, _Constructed(np.array([[np.inf]])))


def test_bic_score_examples():
    ds, _ = simgen.gen_dataset(simgen.ModelSpec(5, 3, 100, 2.0, 1.5, seed=1))
    res = tune_amcr(ds.X, ds.Y)
    init = res.init
    q = 3
    zero = bic_score(ds.X, ds.Y, np.zeros((5, 3)), np.zeros((3, 3)), init)
    assert zero == pytest.approx(sum(100 * np.log(ds.Y[:, k] @ ds.Y[:, k] / 100) for k in range(q)))
    B = res.best_fit.B.copy()
    base = bic_score(ds.X, ds.Y, B, res.best_fit.Gamma, init)
    j = int(np.flatnonzero(B[:, 0] == 0)[0])
    B[j, 0] = 1e-9
    assert bic_score(ds.X, ds.Y, B, res.best_fit.Gamma, init) - base == pytest.approx(
        np.log(100), abs=1e-4)


@pytest.fixture(scope="module")
def exhaustive():
    ds, _ = simgen.gen_dataset(simgen.ModelSpec(5, 3, 100, 2.0, 1.5, seed=3))
    res = tune_amcr(ds.X, ds.Y, keep_fits=True)
    g = default_grid()
    cold = np.empty((19, 19))
    for s, l1 in enumerate(g.lambda1_values):
        for t, l2 in enumerate(g.lambda2_values):
            fit = fit_mcr(ds.X, ds.Y, l1, l2, res.init)
            cold[s, t] = bic_score(ds.X, ds.Y, fit.B, fit.Gamma, res.init, max_df=50)
    return ds, res, cold


def test_exhaustive_recompute_oracle(exhaustive):
    ds, res, cold = exhaustive
    assert np.unravel_index(np.argmin(cold), cold.shape) == res.best_index or \
        cold[res.best_index] == cold.min()
    fin = np.isfinite(res.score_surface)
    assert np.allclose(res.score_surface[fin], cold[fin], rtol=1e-7, atol=1e-7)


def test_surface_matches_stored_fits(exhaustive):
    ds, res, _ = exhaustive
    for s in range(19):
        for t in range(19):
            if not np.isfinite(res.score_surface[s, t]):
                continue
            B, Gamma = res.fits[s, t]
            got = bic_score(ds.X, ds.Y, B, Gamma, res.init, max_df=50)
            assert got == pytest.approx(res.score_surface[s, t], abs=1e-9, rel=1e-12)


def test_warm_started_cells_satisfy_kkt(exhaustive):
    ds, res, _ = exhaustive
    u, v = compute_adaptive_weights(res.init)
    g = default_grid()
    for s, t in [(0, 0), (3, 15), (9, 9), (18, 2)]:
        B, Gamma = res.fits[s, t]
        for k in range(3):
            Z = build_augmented_design(ds.X, ds.Y, res.init.B0, k)
            idx = [i for i in range(3) if i != k]
            w = np.concatenate([g.lambda1_values[s] * u[:, k], g.lambda2_values[t] * v[idx, k]])
            prob = LassoProblem(Z, ds.Y[:, k], w, 1.0)
            z = np.concatenate([B[:, k], Gamma[idx, k]])
            assert kkt_check(prob, z, 1e-5) == []


def test_search_result_independent_of_threads():
    ds, _ = simgen.gen_dataset(simgen.ModelSpec(5, 3, 100, 2.0, 1.5, seed=4))
    a = tune_amcr(ds.X, ds.Y, threads=1)
    b = tune_amcr(ds.X, ds.Y, threads=3)
    assert a.best_index == b.best_index
    assert a.score_surface.tobytes() == b.score_surface.tobytes()


def test_log_grid_size():
    assert log_grid(4).tolist() == pytest.approx([1e-3, 10 ** (-8 / 3), 10 ** (-7 / 3), 1e-2])
