import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from ddissip.lti import (Channel, IllPosedLoopError, StateSpace, feedback_interconnect, fir_realization,
                         impulse_response, pe_input_uniform, pi_controller, random_stable_siso, simulate,
                         static_gain, two_tank_plant, unit_delay)


def test_channel_parse():
    assert Channel.parse("r_to_e") is Channel.r_to_e
    with pytest.raises(ValueError, match="unknown channel"):
        Channel.parse("r_to_y")


def test_statespace_validates_shapes():
    with pytest.raises(ValueError):
        StateSpace([[1.0, 0.0]], [[1.0]], [[1.0]], 0.0)


def test_simulate_unit_delay():
    tr = simulate(unit_delay(), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(tr.y, [0.0, 1.0, 2.0])


def test_simulate_x0_dimension():
    with pytest.raises(ValueError):
        simulate(two_tank_plant(), np.ones(3), x0=[1.0])


def test_impulse_response_matches_scipy():
    P = two_tank_plant()
    _, (y,) = signal.dimpulse((P.A, P.B, P.C, [[P.D]], 1), n=30)
    np.testing.assert_allclose(impulse_response(P, 30), y.ravel(), atol=1e-15)


def test_two_tank_is_minimal_and_stable():
    P = two_tank_plant()
    assert P.n == 2 and P.is_minimal()
    assert P.spectral_radius() == pytest.approx(0.9677)


def test_pi_controller_markov():
    np.testing.assert_allclose(impulse_response(pi_controller(0.1551, 0.0084, 0.5), 4),
                               [0.1551, 0.0042, 0.0042, 0.0042])


def test_fir_realization_reproduces_taps():
    a = [0.3, -1.0, 2.0, 0.5]
    np.testing.assert_allclose(impulse_response(fir_realization(a), 7), a + [0, 0, 0])
    assert impulse_response(fir_realization([2.0]), 3).tolist() == [2.0, 0.0, 0.0]


def test_interconnect_static_loop():
    # G = 2, K = 3: z/r = 6/7, e/r = 1/7, u/r = 3/7
    for ch, want in ((Channel.r_to_z, 6 / 7), (Channel.r_to_e, 1 / 7), (Channel.r_to_u, 3 / 7)):
        assert impulse_response(feedback_interconnect(static_gain(2.0), static_gain(3.0), ch), 1)[0] \
            == pytest.approx(want)


def test_interconnect_ill_posed():
    with pytest.raises(IllPosedLoopError):
        feedback_interconnect(static_gain(1.0), static_gain(-1.0))


def _loop_by_recursion(G, K, r):
    """Direct time-domain simulation of e = r - z, u = K e, z = G u."""
    x, xc = np.zeros(G.n), np.zeros(K.n)
    z, e, u = (np.empty_like(r) for _ in range(3))
    s = 1.0 / (1.0 + G.D * K.D)
    for k, rk in enumerate(r):
        zk = s * (G.C[0] @ x + G.D * (K.C[0] @ xc + K.D * rk))
        ek = rk - zk
        uk = K.C[0] @ xc + K.D * ek
        z[k], e[k], u[k] = zk, ek, uk
        x = G.A @ x + G.B[:, 0] * uk
        xc = K.A @ xc + K.B[:, 0] * ek
    return {Channel.r_to_z: z, Channel.r_to_e: e, Channel.r_to_u: u}


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10_000), st.lists(st.floats(-1, 1), min_size=1, max_size=4))
def test_interconnect_matches_recursion(n, seed, taps):
    G = random_stable_siso(n, seed)
    K = fir_realization(taps)
    if abs(1 + G.D * K.D) < 1e-3:
        return
    r = np.random.default_rng(seed).standard_normal(15)
    want = _loop_by_recursion(G, K, r)
    for ch in Channel:
        got = simulate(feedback_interconnect(G, K, ch), r).y
        np.testing.assert_allclose(got, want[ch], rtol=1e-9, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_simulation_linearity(seed):
    rng = np.random.default_rng(seed)
    P = random_stable_siso(2, seed)
    u1, u2 = rng.standard_normal((2, 20))
    a, b = rng.standard_normal(2)
    lhs = simulate(P, a * u1 + b * u2).y
    np.testing.assert_allclose(lhs, a * simulate(P, u1).y + b * simulate(P, u2).y, atol=1e-10)


def test_pe_input_reproducible():
    np.testing.assert_array_equal(pe_input_uniform(10, seed=3), pe_input_uniform(10, seed=3))
    u = pe_input_uniform(1000, seed=1)
    assert u.min() >= -10 and u.max() <= 10


def test_random_fixture_properties():
    for seed in range(10):
        P = random_stable_siso(3, seed)
        assert P.is_minimal() and P.spectral_radius() < 0.95
