import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttcomplete.errors import InvalidArgument
from ttcomplete.wlrf import (init_factors, objective_gradients, ridge_wls, update_u, update_v,
                             update_weights, weighted_objective)


def normal_equations_oracle(D, t, w, lam):
    # dense brute force: explicit inverse of (D^T diag(w) D + lam I)
    L = np.diag(w)
    A = D.T @ L @ D + lam * np.eye(D.shape[1])
    return np.linalg.inv(A) @ (D.T @ L @ t)


def test_ridge_matches_oracle_20x5():
    rng = np.random.default_rng(0)
    D, t, w = rng.standard_normal((20, 5)), rng.standard_normal(20), rng.random(20)
    np.testing.assert_allclose(ridge_wls(D, t, w, 0.3), normal_equations_oracle(D, t, w, 0.3),
                               rtol=1e-10, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 50), st.integers(1, 10), st.floats(1e-3, 10.0), st.integers(0, 2**32 - 1))
def test_ridge_matches_oracle_random(p, r, lam, seed):
    rng = np.random.default_rng(seed)
    D, t, w = rng.standard_normal((p, r)), rng.standard_normal(p), rng.random(p)
    x = ridge_wls(D, t, w, lam)
    ref = normal_equations_oracle(D, t, w, lam)
    assert np.linalg.norm(x - ref) <= 1e-9 * max(np.linalg.norm(ref), 1e-300) + 1e-14


def test_ridge_reduces_to_least_squares():
    rng = np.random.default_rng(1)
    D, t = rng.standard_normal((6, 6)), rng.standard_normal(6)
    np.testing.assert_allclose(ridge_wls(D, t, np.ones(6), 1e-12), np.linalg.solve(D, t),
                               atol=1e-8)


def test_ridge_zero_weights_gives_zero():
    rng = np.random.default_rng(2)
    assert np.all(ridge_wls(rng.standard_normal((7, 3)), rng.standard_normal(7),
                            np.zeros(7), 0.1) == 0)


@pytest.mark.parametrize("bad", [
    dict(lam=0.0), dict(lam=-1.0), dict(w=-np.ones(4)), dict(t=np.array([1, np.nan, 0, 0])),
])
def test_ridge_validation(bad):
    args = dict(D=np.ones((4, 2)), t=np.ones(4), w=np.ones(4), lam=1.0)
    args.update(bad)
    with pytest.raises(InvalidArgument):
        ridge_wls(args["D"], args["t"], args["w"], args["lam"])


def test_update_v_scalar_by_hand():
    v = update_v(np.array([[2.0]]), np.array([[6.0]]), np.array([[1.0]]), 0.5)
    assert v[0, 0] == pytest.approx(12 / 4.5)


def test_update_u_scalar_by_hand():
    u = update_u(np.array([[2.0]]), np.array([[6.0]]), np.array([[1.0]]), 0.5)
    assert u[0, 0] == pytest.approx(12 / 4.5)


def test_updates_interpolate_exact_low_rank():
    rng = np.random.default_rng(3)
    U, V = rng.standard_normal((9, 2)), rng.standard_normal((7, 2))
    X = U @ V.T
    W = np.ones_like(X)
    np.testing.assert_allclose(U @ update_v(U, X, W, 1e-12).T, X, atol=1e-8)
    np.testing.assert_allclose(update_u(V, X, W, 1e-12) @ V.T, X, atol=1e-8)


def test_zero_weight_column_and_row():
    rng = np.random.default_rng(4)
    U, V, X = rng.standard_normal((5, 2)), rng.standard_normal((4, 2)), rng.standard_normal((5, 4))
    W = rng.random((5, 4)) + 0.1
    W[:, 2] = 0
    assert np.all(update_v(U, X, W, 0.1)[2] == 0)
    W = rng.random((5, 4)) + 0.1
    W[3] = 0
    assert np.all(update_u(V, X, W, 0.1)[3] == 0)


def test_updates_match_per_column_oracle():
    rng = np.random.default_rng(5)
    U, V = rng.standard_normal((8, 3)), rng.standard_normal((6, 3))
    X, W = rng.standard_normal((8, 6)), rng.random((8, 6))
    Vn = update_v(U, X, W, 0.2)
    for j in range(6):
        np.testing.assert_allclose(Vn[j], normal_equations_oracle(U, X[:, j], W[:, j] ** 2, 0.2),
                                   rtol=1e-10)
    Un = update_u(V, X, W, 0.3)
    for i in range(8):
        np.testing.assert_allclose(Un[i], normal_equations_oracle(V, X[i], W[i] ** 2, 0.3),
                                   rtol=1e-10)


def test_rank_bound():
    with pytest.raises(InvalidArgument):
        update_v(np.ones((2, 3)), np.ones((2, 5)), np.ones((2, 5)), 0.1)
    with pytest.raises(InvalidArgument):
        update_u(np.ones((5, 3)), np.ones((2, 5)), np.ones((2, 5)), 0.1)


def test_updates_do_not_increase_objective():
    rng = np.random.default_rng(6)
    for _ in range(20):
        U, V = rng.standard_normal((10, 3)), rng.standard_normal((8, 3))
        X, W = rng.standard_normal((10, 8)), rng.random((10, 8))
        j0 = weighted_objective(X, U, V, W, 0.1, 0.2)
        V = update_v(U, X, W, 0.2)
        j1 = weighted_objective(X, U, V, W, 0.1, 0.2)
        U = update_u(V, X, W, 0.1)
        j2 = weighted_objective(X, U, V, W, 0.1, 0.2)
        assert j1 <= j0 + 1e-12 and j2 <= j1 + 1e-12


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(5):
        X, W = rng.standard_normal((8, 6)), rng.random((8, 6))
        U, V = rng.standard_normal((8, 2)), rng.standard_normal((6, 2))
        gU, gV = objective_gradients(X, U, V, W, 0.3, 0.7)
        h = 1e-6
        for G, A, which in ((gU, U, 0), (gV, V, 1)):
            fd = np.empty_like(A)
            for idx in np.ndindex(A.shape):
                Ap, Am = A.copy(), A.copy()
                Ap[idx] += h
                Am[idx] -= h
                args_p = (Ap, V) if which == 0 else (U, Ap)
                args_m = (Am, V) if which == 0 else (U, Am)
                fd[idx] = (weighted_objective(X, *args_p, W, 0.3, 0.7)
                           - weighted_objective(X, *args_m, W, 0.3, 0.7)) / (2 * h)
            assert np.linalg.norm(G - fd) <= 1e-5 * np.linalg.norm(fd)


def test_stationary_point_after_updates():
    # the closed form for V zeroes dJ/dV
    rng = np.random.default_rng(8)
    X, W = rng.standard_normal((7, 5)), rng.random((7, 5))
    U = rng.standard_normal((7, 2))
    V = update_v(U, X, W, 0.4)
    _, gV = objective_gradients(X, U, V, W, 0.1, 0.4)
    assert np.abs(gV).max() < 1e-10


def test_weights_formula_and_pinning():
    X = np.array([[0.0, 1.0], [2.0, 0.5]])
    U, V = np.ones((2, 1)), np.zeros((2, 1))
    w = update_weights(X, U, V, c=1.0, gamma=2.0)
    np.testing.assert_allclose(w, np.exp(-np.abs(X)))
    assert w[0, 0] == 1.0
    w = update_weights(X, U, V, c=0.7, gamma=3.0, known=np.array([[False, True], [False, False]]))
    assert w[0, 1] == 1.0
    assert w[0, 0] == pytest.approx(0.7)
    assert w[1, 0] == pytest.approx(0.7 * np.sqrt(np.exp(-6.0)))


def test_weights_monotone_and_positive():
    def weights(e):
        return update_weights(e[None, :], np.zeros((1, 1)), np.zeros((e.size, 1)),
                              c=2.0, gamma=10.0)[0]

    w = weights(np.linspace(0, 5, 501))
    assert np.all(np.diff(w) < 0)
    w = weights(np.linspace(0, 1e4, 1001))
    assert np.all(w > 0) and np.all(w <= 2.0)
    assert np.all(np.diff(w) <= 0)


@pytest.mark.parametrize("c,gamma", [(0, 1), (1, 0), (-1, 1)])
def test_weights_validation(c, gamma):
    with pytest.raises(InvalidArgument):
        update_weights(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), c, gamma)


def test_init_factors_seeded():
    a = init_factors(5, 4, 2, np.random.default_rng(0))
    b = init_factors(5, 4, 2, np.random.default_rng(0))
    assert a[0].shape == (5, 2) and a[1].shape == (4, 2)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
