import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddissip.lti import Trajectory, impulse_response, random_stable_siso, simulate, two_tank_plant
from ddissip.trajectory import (InsufficientDataError, build_data_page, excitation_order, hankel,
                                initial_window_selector, is_persistently_exciting, kernel_basis,
                                toeplitz, truncation_selectors)

from conftest import make_page


def test_hankel_small():
    np.testing.assert_array_equal(hankel([1, 2, 3, 4], 2), [[1, 2, 3], [2, 3, 4]])
    np.testing.assert_array_equal(hankel([5], 1), [[5]])


def test_hankel_two_tank_shape():
    assert hankel(np.arange(223.0), 110).shape == (110, 114)


def test_hankel_too_deep():
    with pytest.raises(InsufficientDataError):
        hankel([1, 2], 3)


def test_toeplitz_small():
    np.testing.assert_array_equal(toeplitz([1, 2, 3]), [[1, 0, 0], [2, 1, 0], [3, 2, 1]])
    np.testing.assert_array_equal(toeplitz([4.0]), [[4.0]])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_toeplitz_is_convolution(seed):
    a, u = np.random.default_rng(seed).standard_normal((2, 8))
    np.testing.assert_allclose(toeplitz(a) @ u, np.convolve(a, u)[:8], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_toeplitz_commute(seed):
    a, g, v = np.random.default_rng(seed).standard_normal((3, 10))
    np.testing.assert_allclose(toeplitz(a) @ toeplitz(g) @ v, toeplitz(g) @ toeplitz(a) @ v, atol=1e-10)


def test_pe_constant_fails():
    rep = is_persistently_exciting(np.ones(20), 2)
    assert not rep and rep.rank == 1


def test_pe_impulse():
    # impulse at index order-1 makes the Hankel matrix an anti-identity
    x = np.zeros(2 * 5 - 1)
    x[4] = 1.0
    assert is_persistently_exciting(x, 5)
    # an impulse at index 0 only excites the first row
    x = np.zeros(9)
    x[0] = 1.0
    assert is_persistently_exciting(x, 5).rank == 1


def test_pe_short_data_reason():
    rep = is_persistently_exciting(np.arange(5.0), 4)
    assert not rep and "insufficient data length" in rep.reason


def test_pe_two_tank_order_112():
    from ddissip.lti import pe_input_uniform
    for seed in range(3):
        u = pe_input_uniform(223, seed=seed)
        assert is_persistently_exciting(u, 112)
        assert excitation_order(u) == 112


def test_kernel_basis_examples():
    assert kernel_basis(np.eye(3)).shape == (3, 0)
    k = kernel_basis([[1.0, -1.0]])
    assert k.shape == (2, 1)
    np.testing.assert_allclose(np.abs(k[:, 0]), [2 ** -0.5] * 2, atol=1e-14)
    A = np.random.default_rng(0).standard_normal((4, 10))
    K = kernel_basis(A)
    assert K.shape == (10, 6)
    assert np.abs(A @ K).max() < 1e-12


def test_selectors():
    J1, J = truncation_selectors(3, 1)
    np.testing.assert_array_equal(J1 @ [1.0, 2.0, 3.0], [2.0, 3.0])
    u, y = np.arange(3.0), 10 + np.arange(3.0)
    np.testing.assert_array_equal(J @ np.r_[u, y], [1, 2, 11, 12])
    assert truncation_selectors(110, 2)[1].shape == (216, 220)
    S = initial_window_selector(4, 2)
    np.testing.assert_array_equal(S @ np.arange(8.0), [0, 1, 4, 5])


def test_two_tank_page(two_tank_page):
    pg = two_tank_page
    assert pg.H.shape == (220, 114)
    assert pg.V.shape == (114, 108)
    np.testing.assert_allclose(pg.V.T @ pg.V, np.eye(108), atol=1e-10)
    HV = pg.HV
    assert np.abs(initial_window_selector(110, 2) @ HV).max() < 1e-10
    g = impulse_response(two_tank_plant(), 110)
    np.testing.assert_allclose(HV[110:], toeplitz(g) @ HV[:110], atol=1e-8 * np.abs(HV).max())


@pytest.mark.parametrize("n,seed", [(1, 3), (2, 5), (3, 7)])
def test_fundamental_lemma_span(n, seed):
    sys, pg = make_page(n, seed, L=12)
    HV = pg.HV
    g = impulse_response(sys, 12)
    # every zero-initial-condition trajectory lies in col(HV)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        u = np.r_[np.zeros(n), rng.standard_normal(12 - n)]
        w = np.r_[u, toeplitz(g) @ u]
        beta, *_ = np.linalg.lstsq(HV, w, rcond=None)
        assert np.linalg.norm(HV @ beta - w) <= 1e-8 * np.linalg.norm(w)
    np.testing.assert_allclose(HV[12:], toeplitz(g) @ HV[:12], atol=1e-8 * np.abs(HV).max())
    assert pg.V.shape[1] == 12 - n


def test_page_preconditions():
    sys = random_stable_siso(2, 1)
    tr = simulate(sys, np.random.default_rng(0).standard_normal(40))
    with pytest.raises(ValueError, match="n_bound"):
        build_data_page(tr, 10, 1, 2)
    with pytest.raises(ValueError):
        build_data_page(tr, 10, 10, 2)


def test_page_insufficient_data():
    tr = Trajectory(np.random.default_rng(0).standard_normal(10), np.zeros(10))
    with pytest.raises(InsufficientDataError, match="insufficient data"):
        build_data_page(tr, 110, 2, 2)
    tr = Trajectory(np.random.default_rng(0).standard_normal(30), np.zeros(30))
    with pytest.raises(InsufficientDataError, match="order 15"):
        build_data_page(tr, 20, 2, 2)
