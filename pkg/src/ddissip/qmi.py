"""Feasibility of quadratic matrix inequalities Q(p) <= 0.

The solver follows the convex-concave (DC) scheme: the quadratic part of Q is
split into a convex and a concave matrix function, the concave part is
linearized at the current iterate, and the resulting convex majorant's
largest eigenvalue is minimized. Each accepted step therefore cannot increase
lambda_max(Q(p)).

The inner convex problem min_p lambda_max(M(p)) is solved with Kelley cutting
planes on a trust box (subgradients from the top eigenvector) using the HiGHS
LP solver. No SDP solver is required.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import linprog

from .synthesis import QmiProblem

log = logging.getLogger(__name__)


def evaluate(problem: QmiProblem, p) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if p.size != problem.d:
        raise ValueError(f"expected {problem.d} parameters, got {p.size}")
    Q = problem.Q0.copy()
    for pi, Qi in zip(p, problem.Qi):
        if pi:
            Q += pi * Qi
    for (i, j), Qij in problem.Qij.items():
        c = p[i] * p[j]
        if c:
            Q += c * Qij
    return 0.5 * (Q + Q.T)


def top_eig(M: np.ndarray) -> tuple[float, np.ndarray]:
    m = M.shape[0]
    w, v = eigh(M, subset_by_index=[m - 1, m - 1])
    if w.size == 0:
        # the subset driver can return nothing on matrices with subnormal entries
        w, v = np.linalg.eigh(M)
        return float(w[-1]), v[:, -1]
    return float(w[0]), v[:, 0]


def lambda_max(problem: QmiProblem, p) -> float:
    return top_eig(evaluate(problem, p))[0]


def gradient(problem: QmiProblem, p, v) -> np.ndarray:
    """Gradient of v' Q(p) v in p (a subgradient of lambda_max when v is a top eigenvector)."""
    p = np.asarray(p, dtype=float)
    g = np.array([v @ Qi @ v for Qi in problem.Qi])
    for (i, j), Qij in problem.Qij.items():
        s = v @ Qij @ v
        if i == j:
            g[i] += 2.0 * p[i] * s
        else:
            g[i] += p[j] * s
            g[j] += p[i] * s
    return g


@dataclass(frozen=True)
class DcSplit:
    """Q(p) = convex(p) - concave(p), both quadratic terms built from PSD lifts.

    ``plus`` and ``minus`` are the PSD and NSD parts (the latter negated) of
    the symmetric (d m) x (d m) lift whose (i, j) block multiplies p_i p_j.
    """

    problem: QmiProblem
    plus: np.ndarray
    minus: np.ndarray

    def _quad(self, P, p) -> np.ndarray:
        m = self.problem.dim
        X = np.kron(np.asarray(p, dtype=float).reshape(-1, 1), np.eye(m))
        return X.T @ P @ X

    def convex(self, p) -> np.ndarray:
        pr = self.problem
        out = pr.Q0 + sum(pi * Qi for pi, Qi in zip(p, pr.Qi)) + self._quad(self.plus, p)
        return 0.5 * (out + out.T)

    def concave(self, p) -> np.ndarray:
        out = self._quad(self.minus, p)
        return 0.5 * (out + out.T)

    def block(self, P, i, j) -> np.ndarray:
        m = self.problem.dim
        return P[i * m:(i + 1) * m, j * m:(j + 1) * m]

    def majorant(self, p_hat) -> QmiProblem:
        """Convex QMI M with M(p) >= Q(p) for all p and M(p_hat) = Q(p_hat)."""
        pr = self.problem
        d = pr.d
        p_hat = np.asarray(p_hat, dtype=float)
        # -X'P-X <= -(Xh'P-X + X'P-Xh - Xh'P-Xh), X = p kron I
        C = [sum(p_hat[i] * self.block(self.minus, i, j) for i in range(d)) for j in range(d)]
        Q0 = pr.Q0 + self.concave(p_hat)
        Qi = tuple(pr.Qi[j] - (C[j] + C[j].T) for j in range(d))
        Qij = {}
        for i in range(d):
            for j in range(i, d):
                B = self.block(self.plus, i, j)
                Qij[(i, j)] = B if i == j else B + B.T
        sym = lambda M: 0.5 * (M + M.T)  # noqa: E731
        return QmiProblem(sym(Q0), tuple(sym(M) for M in Qi), {k: sym(M) for k, M in Qij.items()})


def dc_split(problem: QmiProblem) -> DcSplit:
    d, m = problem.d, problem.dim
    P = np.zeros((d * m, d * m))
    for (i, j), Qij in problem.Qij.items():
        if i == j:
            P[i * m:(i + 1) * m, i * m:(i + 1) * m] = Qij
        else:
            P[i * m:(i + 1) * m, j * m:(j + 1) * m] = 0.5 * Qij
            P[j * m:(j + 1) * m, i * m:(i + 1) * m] = 0.5 * Qij
    w, U = np.linalg.eigh(P)
    pos = np.clip(w, 0.0, None)
    neg = np.clip(-w, 0.0, None)
    plus = (U * pos) @ U.T
    minus = (U * neg) @ U.T
    return DcSplit(problem, 0.5 * (plus + plus.T), 0.5 * (minus + minus.T))


@dataclass
class SolverOptions:
    max_iters: int = 100
    eps: float = 1e-6
    p0: np.ndarray | None = None
    stagnation_tol: float = 1e-10
    inner: str = "cutting_plane"
    radius: float = 1.0
    inner_iters: int = 60

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.inner not in ("cutting_plane", "direct_search"):
            raise ValueError(f"unknown inner method {self.inner!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass
class SolveReport:
    p: np.ndarray | None
    feasible: bool
    final_margin: float
    iterations: int
    trace: list = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {"p": None if self.p is None else [float(x) for x in self.p],
                "feasible": self.feasible, "final_margin": self.final_margin,
                "iterations": self.iterations, "trace": [float(x) for x in self.trace],
                "message": self.message}


def _kelley(problem: QmiProblem, center, radius, iters, target):
    """Minimize the convex lambda_max(problem(p)) over the box center +- radius.

    Returns (best_p, best_value, lower_bound).
    """
    d = problem.d
    lo, hi = center - radius, center + radius
    f, v = top_eig(evaluate(problem, center))
    best_p, best_f = center.copy(), f
    cuts_A, cuts_b = [], []
    p = center.copy()
    lower = -np.inf
    for _ in range(iters):
        g = gradient(problem, p, v)
        # f + g'(x - p) <= t   ->   g'x - t <= g'p - f
        cuts_A.append(np.append(g, -1.0))
        cuts_b.append(g @ p - f)
        res = linprog(np.append(np.zeros(d), 1.0), A_ub=np.array(cuts_A), b_ub=np.array(cuts_b),
                      bounds=[(l, h) for l, h in zip(lo, hi)] + [(None, None)], method="highs")
        if res.status != 0:
            break
        p = res.x[:d]
        lower = res.x[d]
        f, v = top_eig(evaluate(problem, p))
        if f < best_f:
            best_p, best_f = p.copy(), f
        if best_f <= target:
            break
        if best_f - lower <= 1e-9 * max(1.0, abs(best_f)):
            break
    return best_p, best_f, lower


def _pattern_search(fun, x0, lo, hi, step, min_step, max_evals=4000):
    """Compass search with step halving; deterministic."""
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    fx = fun(x)
    evals = 1
    d = x.size
    step = np.asarray(step, dtype=float) * np.ones(d)
    while np.max(step) > min_step and evals < max_evals:
        improved = False
        for i in range(d):
            for s in (1.0, -1.0):
                y = x.copy()
                y[i] = np.clip(y[i] + s * step[i], lo[i], hi[i])
                if y[i] == x[i]:
                    continue
                fy = fun(y)
                evals += 1
                if fy < fx:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            step = step / 2.0
    return x, fx


def solve_feasibility(problem: QmiProblem, opts: SolverOptions | None = None) -> SolveReport:
    """Find p with lambda_max(Q(p)) <= -eps by convex-concave iterations.

    A reported feasible point is always re-verified by direct evaluation.
    """
    opts = opts or SolverOptions()
    d = problem.d
    p = np.zeros(d) if opts.p0 is None else np.asarray(opts.p0, dtype=float).ravel().copy()
    if p.size != d:
        raise ValueError(f"p0 has {p.size} entries, problem has {d} parameters")
    split = dc_split(problem)
    radius = np.full(d, float(opts.radius))
    margin = lambda_max(problem, p)
    trace = [margin]
    message = "iteration budget exhausted"
    it = 0
    while it < opts.max_iters:
        if margin <= -opts.eps:
            message = "feasible"
            break
        it += 1
        M = split.majorant(p)
        if opts.inner == "cutting_plane":
            q, _, _ = _kelley(M, p, radius, opts.inner_iters, -opts.eps)
        else:
            q, _ = _pattern_search(lambda x: lambda_max(M, x), p, p - radius, p + radius,
                                   radius / 4.0, 1e-10 * max(1.0, float(np.max(radius))))
        new_margin = lambda_max(problem, q)
        on_edge = np.abs(np.abs(q - p) - radius) <= 1e-9 * np.maximum(radius, 1.0)
        if new_margin < margin:
            p, improvement, margin = q, margin - new_margin, new_margin
        else:
            improvement = 0.0
        trace.append(margin)
        if np.any(on_edge):
            radius = np.where(on_edge, 2.0 * radius, radius)
        elif improvement < opts.stagnation_tol:
            message = "stagnated"
            break
    else:
        if margin <= -opts.eps:
            message = "feasible"
    verified = lambda_max(problem, p)
    feasible = verified <= -opts.eps + 1e-12
    log.debug("dc solve: %s after %d iterations, margin %.3e", message, it, verified)
    return SolveReport(p, feasible, verified, it, trace, "feasible" if feasible else message)


def direct_search(problem: QmiProblem, box, grid: int = 21, eps: float = 0.0,
                  refine: bool = True) -> SolveReport:
    """Grid scan of lambda_max(Q(p)) over a box, then pattern-search refinement.

    Intended for d <= 3. ``box`` is a sequence of (lo, hi) pairs, one per parameter.
    """
    d = problem.d
    if d > 3:
        raise ValueError(f"direct search is limited to d <= 3, got d={d}")
    box = np.asarray(box, dtype=float).reshape(d, 2)
    lo, hi = box[:, 0], box[:, 1]
    axes = [np.linspace(l, h, grid) for l, h in zip(lo, hi)]
    best_p, best_f = None, np.inf
    trace = []
    for pt in itertools.product(*axes):
        f = lambda_max(problem, pt)
        if f < best_f:
            best_p, best_f = np.array(pt), f
            trace.append(f)
    if refine and best_f > -eps:
        step = (hi - lo) / max(grid - 1, 1)
        best_p, best_f = _pattern_search(lambda x: lambda_max(problem, x), best_p, lo, hi,
                                         step, 1e-12 * max(1.0, float(np.max(hi - lo))))
        trace.append(best_f)
    verified = lambda_max(problem, best_p)
    feasible = verified <= -eps + 1e-12
    return SolveReport(best_p, feasible, verified, len(trace), trace,
                       "feasible" if feasible else "no feasible point found in box")
