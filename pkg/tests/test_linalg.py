import numpy as np
import pytest

from mcreg import simgen
from mcreg.linalg import (NotPositiveDefiniteError, center_columns, cholesky_lower,
                          frobenius_norm, inf_norm, invert_spd, one_norm)


def test_center_columns_examples():
    c, m = center_columns(np.array([[1.0], [2.0], [3.0]]))
    assert np.allclose(c.ravel(), [-1, 0, 1]) and m[0] == 2.0
    c, m = center_columns(np.array([[-1.0], [1.0]]))
    assert np.array_equal(c.ravel(), [-1, 1]) and m[0] == 0
    c, m = center_columns(np.full((3, 1), 5.0))
    assert np.array_equal(c.ravel(), [0, 0, 0]) and m[0] == 5


def test_center_columns_rejects_empty():
    with pytest.raises(ValueError):
        center_columns(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        center_columns(np.array([[np.nan, 1.0]]))


def test_center_idempotent():
    M = np.random.default_rng(0).normal(size=(30, 4)) + 7
    c1, _ = center_columns(M)
    c2, m2 = center_columns(c1)
    assert np.max(np.abs(c2 - c1)) < 1e-10
    assert np.all(np.abs(c1.sum(axis=0)) < 1e-10 * 30)


def test_cholesky_examples():
    assert np.array_equal(cholesky_lower(np.eye(3)), np.eye(3))
    L = cholesky_lower(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert np.allclose(L, [[2, 0], [1, np.sqrt(2)]], atol=1e-15)


def test_cholesky_random_spd():
    G = np.random.default_rng(5).normal(size=(8, 5))
    A = G.T @ G
    L = cholesky_lower(A)
    assert np.allclose(L, np.tril(L))
    assert np.linalg.norm(L @ L.T - A) / np.linalg.norm(A) < 1e-8


def test_cholesky_names_failing_pivot():
    S = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
    with pytest.raises(NotPositiveDefiniteError) as info:
        cholesky_lower(S)
    assert info.value.index == 2
    with pytest.raises(ValueError):
        cholesky_lower(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_invert_examples():
    assert np.allclose(invert_spd(np.eye(4)), np.eye(4))
    assert np.allclose(invert_spd(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    Omega = simgen.gen_precision(6, 0.4, np.random.default_rng(3))
    Sigma = invert_spd(Omega)
    assert np.max(np.abs(Omega @ Sigma - np.eye(6))) < 1e-8
    assert np.array_equal(Sigma, Sigma.T)


def test_invert_twice():
    G = np.random.default_rng(9).normal(size=(12, 6))
    S = G.T @ G + np.eye(6)
    back = invert_spd(invert_spd(S))
    assert np.linalg.norm(back - S) / np.linalg.norm(S) < 1e-6


def test_invert_non_spd():
    with pytest.raises(NotPositiveDefiniteError):
        invert_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_norms():
    D = np.array([[1.0, -1.0], [0.0, 0.0]])
    assert frobenius_norm(D) == pytest.approx(np.sqrt(2))
    assert one_norm(D) == 1.0
    assert inf_norm(D) == 2.0
