"""Structured controller parametrizations and the synthesis QMI.

A controller is parametrized by p in R^d through its Toeplitz matrix
T(a(p)) = sum_i p_i T_i. Each closed-loop dissipativity specification becomes

    Q(p) = Q0 + sum_i p_i Qi + sum_{i<=j} p_i p_j Qij  <=  0

where Q(p) is minus the data-based closed-loop dissipativity matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .dissipativity import SupplyRate, block_supply
from .lti import Channel
from .trajectory import DataPage, toeplitz


@dataclass(frozen=True)
class ControllerBasis:
    """Lower-triangular Toeplitz basis matrices T_i with parameter labels."""

    basis: tuple
    labels: tuple
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        mats = tuple(np.asarray(T, dtype=float) for T in self.basis)
        if not mats:
            raise ValueError("controller basis must contain at least one matrix")
        h = mats[0].shape[0]
        for T in mats:
            if T.shape != (h, h):
                raise ValueError(f"basis matrices must all be {h}x{h}, got {T.shape}")
            if not np.allclose(T, toeplitz(T[:, 0]), atol=0.0, rtol=0.0):
                raise ValueError("basis matrices must be lower-triangular Toeplitz")
        if len(self.labels) != len(mats):
            raise ValueError("one label per basis matrix required")
        object.__setattr__(self, "basis", mats)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def d(self) -> int:
        return len(self.basis)

    @property
    def horizon(self) -> int:
        return self.basis[0].shape[0]

    def toeplitz(self, p) -> np.ndarray:
        p = self._check(p)
        return sum(pi * T for pi, T in zip(p, self.basis))

    def impulse_response(self, p) -> np.ndarray:
        """First column of T(a(p)), i.e. the controller's Markov parameters over the horizon."""
        p = self._check(p)
        return sum(pi * T[:, 0] for pi, T in zip(p, self.basis))

    def _check(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float).ravel()
        if p.size != self.d:
            raise ValueError(f"expected {self.d} parameters, got {p.size}")
        return p


def pi_basis(horizon: int, ts: float) -> ControllerBasis:
    """Discrete PI: identity for K_p and a strictly lower all-``ts`` matrix for K_i."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if ts <= 0:
        raise ValueError(f"sampling time must be positive, got {ts}")
    T1 = ts * np.tril(np.ones((horizon, horizon)), k=-1)
    return ControllerBasis((np.eye(horizon), T1), ("K_p", "K_i"), "pi", {"Ts": ts})


def fir_basis(horizon: int, d: int) -> ControllerBasis:
    """FIR taps: T_i has ones on the i-th subdiagonal, so a(p) = p."""
    if not 1 <= d <= horizon:
        raise ValueError(f"need 1 <= d <= horizon, got d={d}, horizon={horizon}")
    mats = tuple(np.eye(horizon, k=-i) for i in range(d))
    return ControllerBasis(mats, tuple(f"a_{i}" for i in range(d)), "fir", {"d": d})


@dataclass(frozen=True)
class DissipativitySpec:
    """Closed-loop requirement: channel, supply rate, optional output filter, relaxation."""

    channel: Channel
    sr: SupplyRate
    filter: np.ndarray | None = None
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "channel", Channel.parse(self.channel))
        if self.delta > 0:
            raise ValueError(f"relaxation delta must be <= 0, got {self.delta}")
        if self.filter is not None:
            object.__setattr__(self, "filter", np.asarray(self.filter, dtype=float).ravel())


@dataclass(frozen=True)
class QmiProblem:
    """Q(p) = Q0 + sum_i p_i Qi[i] + sum_{i<=j} p_i p_j Qij[(i, j)]."""

    Q0: np.ndarray
    Qi: tuple
    Qij: dict

    def __post_init__(self):
        Q0 = np.asarray(self.Q0, dtype=float)
        m = Q0.shape[0]
        d = len(self.Qi)
        Qi = tuple(np.asarray(M, dtype=float) for M in self.Qi)
        Qij = {}
        for i in range(d):
            for j in range(i, d):
                M = self.Qij.get((i, j))
                Qij[(i, j)] = np.zeros((m, m)) if M is None else np.asarray(M, dtype=float)
        extra = set(self.Qij) - set(Qij)
        if extra:
            raise ValueError(f"quadratic terms must be indexed i <= j < d, got {sorted(extra)}")
        for M in (Q0, *Qi, *Qij.values()):
            if M.shape != (m, m):
                raise ValueError(f"all coefficient matrices must be {m}x{m}, got {M.shape}")
            if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(M).max())):
                raise ValueError("coefficient matrices must be symmetric")
        object.__setattr__(self, "Q0", Q0)
        object.__setattr__(self, "Qi", Qi)
        object.__setattr__(self, "Qij", Qij)

    @property
    def dim(self) -> int:
        return self.Q0.shape[0]

    @property
    def d(self) -> int:
        return len(self.Qi)

    def __call__(self, p) -> np.ndarray:
        from .qmi import evaluate

        return evaluate(self, p)


def _channel_blocks(channel: Channel, h: int, T_list):
    """Affine decomposition M(a(p)) = M0 + sum_i p_i Mi of the channel block map."""
    I = np.eye(h)
    Z = np.zeros((h, h))
    if channel is Channel.r_to_z:
        M0 = np.block([[I, Z], [Z, Z]])
        Ms = [np.block([[Z, T], [Z, T]]) for T in T_list]
    elif channel is Channel.r_to_e:
        M0 = np.block([[I, Z], [I, Z]])
        Ms = [np.block([[Z, T], [Z, Z]]) for T in T_list]
    else:
        M0 = np.block([[I, Z], [Z, Z]])
        Ms = [np.block([[Z, T], [T, Z]]) for T in T_list]
    return M0, Ms


def _sym(M):
    return 0.5 * (M + M.T)


def input_normalizer(page: DataPage) -> np.ndarray:
    """Congruence R making the truncated input block ``page.Nu @ R`` orthonormal.

    Replacing N by N R leaves the feasible set of the QMI unchanged (R has
    full column rank on the trajectory space) but makes lambda_max(Q(p))
    independent of how the measured data happen to be scaled.
    """
    U, sv, Wt = np.linalg.svd(page.Nu, full_matrices=False)
    keep = sv > 1e-12 * sv[0]
    return Wt[keep].T / sv[keep]


def spec_factors(page: DataPage, spec: DissipativitySpec, basis: ControllerBasis,
                 normalize: bool = True):
    """Affine closed-loop map Phi(p) = Phi0 + sum_i p_i Phi_i and the supply matrix.

    ``Phi(p)`` includes the optional output filter. With ``normalize`` the
    columns are expressed in the input-normalized coordinates of
    :func:`input_normalizer`; otherwise in the coefficients of the data page.
    """
    h = page.horizon
    if basis.horizon != h:
        raise ValueError(f"basis horizon {basis.horizon} does not match L - nu = {h}")
    M0, Ms = _channel_blocks(spec.channel, h, basis.basis)
    N = page.N_stacked
    if normalize:
        N = N @ input_normalizer(page)
    if spec.filter is not None:
        if spec.filter.size != h:
            raise ValueError(f"filter impulse response must have length {h}, got {spec.filter.size}")
        F = block_diag(np.eye(h), toeplitz(spec.filter))
        M0 = F @ M0
        Ms = [F @ M for M in Ms]
    return M0 @ N, [M @ N for M in Ms], block_supply(spec.sr, h)


def assemble_qmi(page: DataPage, spec: DissipativitySpec, basis: ControllerBasis,
                 normalize: bool = True) -> QmiProblem:
    """Synthesis QMI for one specification by expansion of -Phi(p)' Pi Phi(p).

    The relaxation ``delta`` (<= 0) enters as Phi' Pi Phi >= delta I, i.e. the
    constant term is shifted to Q0 + delta I.
    """
    Phi0, Phis, Pi = spec_factors(page, spec, basis, normalize)
    d = basis.d
    Q0 = -_sym(Phi0.T @ Pi @ Phi0) + spec.delta * np.eye(Phi0.shape[1])
    Qi = tuple(-_sym(Phi0.T @ Pi @ P + P.T @ Pi @ Phi0) for P in Phis)
    Qij = {}
    for i in range(d):
        PiPhi_i = Pi @ Phis[i]
        for j in range(i, d):
            Vij = -Phis[j].T @ PiPhi_i
            Qij[(i, j)] = _sym(Vij) if i == j else _sym(Vij + Vij.T)
    return QmiProblem(Q0, Qi, Qij)


def closed_form_r_to_z(page: DataPage, sr: SupplyRate, basis: ControllerBasis) -> QmiProblem:
    """Explicit coefficients for the unfiltered r -> z channel.

    Qi  = -Nu'(QL + SL) Ti Ny - Ny' Ti'(QL + SL') Nu
    Vij = -Ny' Ti'(QL + SL + SL' + RL) Tj Ny,  Qii = Vii,  Qij = Vij + Vji (i < j)
    Q0  = -Nu' QL Nu
    """
    h = page.horizon
    Nu, Ny = page.Nu, page.Ny
    I = np.eye(h)
    QL, SL, RL = sr.Q * I, sr.S * I, sr.R * I
    Q0 = -Nu.T @ QL @ Nu
    Qi = tuple(-Nu.T @ (QL + SL) @ T @ Ny - Ny.T @ T.T @ (QL + SL.T) @ Nu for T in basis.basis)
    W = QL + SL + SL.T + RL
    V = {(i, j): -Ny.T @ Ti.T @ W @ Tj @ Ny
         for i, Ti in enumerate(basis.basis) for j, Tj in enumerate(basis.basis)}
    Qij = {(i, j): V[i, j] if i == j else V[i, j] + V[j, i]
           for i in range(basis.d) for j in range(i, basis.d)}
    return QmiProblem(_sym(Q0), tuple(_sym(M) for M in Qi), {k: _sym(M) for k, M in Qij.items()})


def direct_form(page: DataPage, spec: DissipativitySpec, basis: ControllerBasis, p,
                normalize: bool = True) -> np.ndarray:
    """-Phi(p)' Pi Phi(p) + delta I evaluated directly at ``p``."""
    Phi0, Phis, Pi = spec_factors(page, spec, basis, normalize)
    p = basis._check(p)
    Phi = Phi0 + sum(pi * P for pi, P in zip(p, Phis))
    return -Phi.T @ Pi @ Phi + spec.delta * np.eye(Phi.shape[1])


def augment(problems) -> QmiProblem:
    """Block-diagonal stacking: feasible iff every block is feasible."""
    problems = list(problems)
    if not problems:
        raise ValueError("nothing to augment")
    d = problems[0].d
    if any(P.d != d for P in problems):
        raise ValueError(f"all problems must share the parameter count, got {[P.d for P in problems]}")
    if len(problems) == 1:
        return problems[0]
    Q0 = block_diag(*(P.Q0 for P in problems))
    Qi = tuple(block_diag(*(P.Qi[i] for P in problems)) for i in range(d))
    Qij = {k: block_diag(*(P.Qij[k] for P in problems)) for k in problems[0].Qij}
    return QmiProblem(Q0, Qi, Qij)


def small_gain_constraint(basis: ControllerBasis, bound: float) -> QmiProblem:
    """T(a(p))' T(a(p)) - bound I <= 0 in standard form (convex in p).

    Strictness is obtained through the solver's margin ``eps``.
    """
    if bound <= 0:
        raise ValueError(f"bound must be positive, got {bound}")
    h, d = basis.horizon, basis.d
    T = basis.basis
    Qij = {}
    for i in range(d):
        for j in range(i, d):
            Qij[(i, j)] = T[i].T @ T[i] if i == j else _sym(T[i].T @ T[j] + T[j].T @ T[i])
    return QmiProblem(-bound * np.eye(h), tuple(np.zeros((h, h)) for _ in range(d)), Qij)


def assemble_all(page: DataPage, specs, basis: ControllerBasis,
                 small_gain_bound: float | None = None, normalize: bool = True) -> QmiProblem:
    problems = [assemble_qmi(page, s, basis, normalize) for s in specs]
    if small_gain_bound is not None:
        problems.append(small_gain_constraint(basis, small_gain_bound))
    return augment(problems)


def parameter_bounds(basis: ControllerBasis, lower=None, upper=None) -> QmiProblem:
    """Box constraints on p as 1x1 linear blocks: lower_i - p_i <= 0, p_i - upper_i <= 0.

    ``None`` entries (or a ``None`` sequence) leave that side unconstrained.
    """
    d = basis.d
    lower = [None] * d if lower is None else list(lower)
    upper = [None] * d if upper is None else list(upper)
    if len(lower) != d or len(upper) != d:
        raise ValueError(f"bounds must have {d} entries")
    rows = [(i, -1.0, lo) for i, lo in enumerate(lower) if lo is not None]
    rows += [(i, 1.0, -hi) for i, hi in enumerate(upper) if hi is not None]
    if not rows:
        raise ValueError("no bounds given")
    m = len(rows)
    Q0 = np.diag([c for _, _, c in rows])
    Qi = []
    for k in range(d):
        Qi.append(np.diag([s if i == k else 0.0 for i, s, _ in rows]))
    return QmiProblem(Q0, tuple(Qi), {})
