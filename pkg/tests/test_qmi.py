import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddissip.qmi import (SolverOptions, dc_split, direct_search, evaluate, lambda_max, solve_feasibility)
from ddissip.synthesis import QmiProblem


def scalar(q0, q1, q11):
    return QmiProblem(np.array([[q0]]), (np.array([[q1]]),), {(0, 0): np.array([[q11]])})


def random_problem(rng, d, m, kappa=0.0):
    sym = lambda A: 0.5 * (A + A.T)  # noqa: E731
    Qij = {(i, j): sym(rng.standard_normal((m, m))) for i in range(d) for j in range(i, d)}
    for i in range(d):
        Qij[(i, i)] = Qij[(i, i)] + kappa * np.eye(m)
    return QmiProblem(sym(rng.standard_normal((m, m))) - 0.5 * np.eye(m),
                      tuple(sym(rng.standard_normal((m, m))) for _ in range(d)), Qij)


def test_evaluate_examples():
    prob = scalar(0.0, 2.0, 1.0)
    np.testing.assert_array_equal(evaluate(prob, [-1.0]), [[-1.0]])
    np.testing.assert_array_equal(evaluate(prob, [0.0]), prob.Q0)
    with pytest.raises(ValueError):
        evaluate(prob, [1.0, 2.0])


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(max_iters=0)
    with pytest.raises(ValueError):
        SolverOptions(eps=-1)
    with pytest.raises(ValueError):
        SolverOptions(inner="sdp")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_dc_split_reconstruction(seed, d):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, d, 5)
    split = dc_split(prob)
    for _ in range(3):
        p = rng.standard_normal(d)
        np.testing.assert_allclose(split.convex(p) - split.concave(p), evaluate(prob, p), atol=1e-10)
    # midpoint convexity of lambda_max along a random line, for both parts
    p, q = rng.standard_normal((2, d))
    for f in (split.convex, split.concave):
        mid = np.linalg.eigvalsh(f(0.5 * (p + q)))[-1]
        ends = 0.5 * (np.linalg.eigvalsh(f(p))[-1] + np.linalg.eigvalsh(f(q))[-1])
        assert mid <= ends + 1e-10


def test_dc_split_convex_problem():
    split = dc_split(scalar(-1.0, 0.0, 1.0))
    assert np.abs(split.minus).max() == 0.0
    split = dc_split(scalar(0.0, 0.0, -2.0))
    np.testing.assert_allclose(split.minus, [[2.0]])
    assert np.abs(split.plus).max() == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_majorant(seed, d):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, d, 4)
    split = dc_split(prob)
    ph = rng.standard_normal(d)
    M = split.majorant(ph)
    np.testing.assert_allclose(evaluate(M, ph), evaluate(prob, ph), atol=1e-10)
    for _ in range(5):
        p = ph + rng.standard_normal(d)
        assert np.linalg.eigvalsh(evaluate(M, p) - evaluate(prob, p))[0] >= -1e-9


def test_scalar_convex_example():
    rep = solve_feasibility(scalar(-1.0, 0.0, 1.0), SolverOptions(eps=0.5))
    assert rep.feasible and abs(rep.p[0]) <= 0.5 ** 0.5 + 1e-12
    rep = direct_search(scalar(-1.0, 0.0, 1.0), [(-3, 3)], eps=0.5)
    assert rep.feasible


def test_zero_problem_immediate():
    prob = QmiProblem(np.zeros((2, 2)), (np.zeros((2, 2)),), {})
    rep = solve_feasibility(prob, SolverOptions(eps=0.0))
    assert rep.feasible and rep.iterations == 0


def test_no_feasible_point():
    prob = QmiProblem(np.eye(2), (np.zeros((2, 2)),), {})
    rep = direct_search(prob, [(-1, 1)])
    assert not rep.feasible and rep.final_margin == pytest.approx(1.0)
    rep = solve_feasibility(prob)
    assert not rep.feasible and rep.p is not None


def test_direct_search_dimension_limit():
    prob = QmiProblem(np.eye(1), tuple(np.zeros((1, 1)) for _ in range(4)), {})
    with pytest.raises(ValueError):
        direct_search(prob, [(-1, 1)] * 4)


@pytest.mark.parametrize("inner", ["cutting_plane", "direct_search"])
def test_nonconvex_scalar(inner):
    # 1 - p^2 <= -eps needs |p| >= 1: concave, reached by growing the trust box
    rep = solve_feasibility(scalar(1.0, 0.0, -1.0), SolverOptions(eps=0.1, p0=[0.1], inner=inner))
    assert rep.feasible and abs(rep.p[0]) ** 2 >= 1.1 - 1e-9


def test_lambda_max_subnormal_entries():
    # regression: the subset eigensolver returned no eigenvalue for this input
    from ddissip.synthesis import pi_basis, small_gain_constraint
    prob = small_gain_constraint(pi_basis(20, 0.5), 0.6875)
    assert lambda_max(prob, [1.0, 7.058681097090251e-233]) == pytest.approx(1.0 - 0.6875)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000))
def test_trace_monotone_and_deterministic(seed):
    rng = np.random.default_rng(seed)
    prob = random_problem(rng, 2, 6, kappa=1.0)
    r1 = solve_feasibility(prob)
    r2 = solve_feasibility(prob)
    assert np.all(np.diff(r1.trace) <= 1e-10)
    assert r1.to_dict() == r2.to_dict()
    if r1.feasible:
        assert lambda_max(prob, r1.p) <= -1e-6 + 1e-12
