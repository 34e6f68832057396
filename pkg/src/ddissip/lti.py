"""Discrete-time SISO LTI systems: simulation, Markov parameters, feedback
interconnection and test fixtures.

These are the model-based tools. The data-driven modules never touch a
``StateSpace`` object; it exists to generate data and to provide brute-force
oracles for the data-based verdicts.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

ILL_POSED_TOL = 1e-12


class Channel(str, enum.Enum):
    """Input/output channel of the standard feedback loop e = r - z, u = K e, z = G u."""

    r_to_z = "r_to_z"
    r_to_e = "r_to_e"
    r_to_u = "r_to_u"

    @classmethod
    def parse(cls, value: "Channel | str") -> "Channel":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(c.value for c in cls)
            raise ValueError(f"unknown channel {value!r}; expected one of {names}") from None


def _numerical_rank(M: np.ndarray, rtol: float) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


class IllPosedLoopError(ValueError):
    """Raised when 1 + D_plant * D_controller vanishes."""


@dataclass(frozen=True)
class StateSpace:
    """Minimal SISO realization x+ = A x + B u, y = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(-1, 1) if np.size(self.B) else np.zeros((n, 1))
        C = np.asarray(self.C, dtype=float).reshape(1, -1) if np.size(self.C) else np.zeros((1, n))
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape != (n, 1):
            raise ValueError(f"B must be {n}x1, got shape {B.shape}")
        if C.shape != (1, n):
            raise ValueError(f"C must be 1x{n}, got shape {C.shape}")
        for name, val in (("A", A), ("B", B), ("C", C)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "D", float(np.asarray(self.D).reshape(())))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def controllability_matrix(self) -> np.ndarray:
        cols = [self.B]
        for _ in range(self.n - 1):
            cols.append(self.A @ cols[-1])
        return np.hstack(cols)

    def observability_matrix(self) -> np.ndarray:
        rows = [self.C]
        for _ in range(self.n - 1):
            rows.append(rows[-1] @ self.A)
        return np.vstack(rows)

    def is_minimal(self, rtol: float = 1e-9) -> bool:
        """Full rank of the n-step controllability and observability matrices.

        Rank counts singular values above ``rtol`` times the largest one.
        """
        return (_numerical_rank(self.controllability_matrix(), rtol) == self.n
                and _numerical_rank(self.observability_matrix(), rtol) == self.n)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


@dataclass(frozen=True)
class Trajectory:
    """Paired input/output samples of equal length."""

    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if u.size < 1:
            raise ValueError("trajectory must contain at least one sample")
        if u.shape != y.shape:
            raise ValueError(f"u and y lengths differ: {u.size} vs {y.size}")
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def N(self) -> int:
        return self.u.size

    def __len__(self):
        return self.N


def simulate(sys: StateSpace, u, x0=None) -> Trajectory:
    """Run the state recursion from ``x0`` (zero by default) driven by ``u``."""
    u = np.asarray(u, dtype=float).ravel()
    if u.size < 1:
        raise ValueError("input sequence must contain at least one sample")
    x = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x.size != sys.n:
        raise ValueError(f"x0 has dimension {x.size}, system has state dimension {sys.n}")
    b = sys.B[:, 0]
    c = sys.C[0]
    y = np.empty_like(u)
    for k, uk in enumerate(u):
        y[k] = c @ x + sys.D * uk
        x = sys.A @ x + b * uk
    return Trajectory(u, y)


def impulse_response(sys: StateSpace, L: int) -> np.ndarray:
    """Markov parameters a_0 = D, a_k = C A^(k-1) B for k = 0..L-1."""
    if L < 1:
        raise ValueError(f"horizon must be >= 1, got {L}")
    a = np.empty(L)
    a[0] = sys.D
    v = sys.B[:, 0].copy()
    for k in range(1, L):
        a[k] = sys.C[0] @ v
        v = sys.A @ v
    return a


def feedback_interconnect(plant: StateSpace, controller: StateSpace,
                          channel: Channel | str = Channel.r_to_z) -> StateSpace:
    """Realization of the standard feedback loop from r to the chosen channel output.

    The state is the plant state stacked on the controller state. Only the
    output equation depends on ``channel``.

    Raises:
        IllPosedLoopError: if ``|1 + D * Dc| <= 1e-12``.
    """
    channel = Channel.parse(channel)
    D, Dc = plant.D, controller.D
    denom = 1.0 + D * Dc
    if abs(denom) <= ILL_POSED_TOL:
        raise IllPosedLoopError(f"feedback loop is ill-posed: 1 + D*Dc = {denom:.3e}")
    s = 1.0 / denom
    n, nc = plant.n, controller.n
    A, B, C = plant.A, plant.B, plant.C
    Ac, Bc, Cc = controller.A, controller.B, controller.C

    # z = s (C x + D Cc xc + D Dc r), e = r - z, u = Cc xc + Dc e
    z_x, z_xc, z_r = s * C, s * D * Cc, s * D * Dc
    e_x, e_xc, e_r = -z_x, -z_xc, 1.0 - z_r
    u_x, u_xc, u_r = Dc * e_x, Cc + Dc * e_xc, Dc * e_r

    Acl = np.block([[A + B @ u_x, B @ u_xc],
                    [Bc @ e_x, Ac + Bc @ e_xc]])
    Bcl = np.vstack([B * u_r, Bc * e_r])
    out = {Channel.r_to_z: (z_x, z_xc, z_r),
           Channel.r_to_e: (e_x, e_xc, e_r),
           Channel.r_to_u: (u_x, u_xc, u_r)}[channel]
    Ccl = np.hstack([out[0], out[1]]).reshape(1, n + nc)
    return StateSpace(Acl, Bcl, Ccl, out[2])


def static_gain(k: float) -> StateSpace:
    """Memoryless gain as a one-state realization with a decoupled zero state."""
    return StateSpace([[0.0]], [[0.0]], [[0.0]], k)


def unit_delay() -> StateSpace:
    return StateSpace([[0.0]], [[1.0]], [[1.0]], 0.0)


def fir_realization(a) -> StateSpace:
    """Shift-register realization with impulse response exactly ``a``.

    Taps beyond ``len(a)`` are zero. A length-1 ``a`` gives a static gain.
    """
    a = np.asarray(a, dtype=float).ravel()
    m = a.size - 1
    if m == 0:
        return static_gain(a[0])
    A = np.eye(m, k=-1)
    B = np.zeros((m, 1))
    B[0, 0] = 1.0
    return StateSpace(A, B, a[1:].reshape(1, m), a[0])


def pi_controller(kp: float, ki: float, ts: float) -> StateSpace:
    """Discrete PI with impulse response [kp, ki*ts, ki*ts, ...]."""
    return StateSpace([[1.0]], [[1.0]], [[ki * ts]], kp)


def two_tank_plant() -> StateSpace:
    """Linearized two-tank process sampled at 0.5 s; output is the second tank level."""
    A = [[0.9677, 0.0], [0.0317, 0.9677]]
    B = [[0.1363], [0.0022]]
    C = [[0.0, 1.0]]
    return StateSpace(A, B, C, 0.0)


TWO_TANK_TS = 0.5


def pe_input_uniform(N: int, lo: float = -10.0, hi: float = 10.0, seed: int = 0) -> np.ndarray:
    """I.i.d. uniform samples on (lo, hi), reproducible through ``seed``."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    return np.random.default_rng(seed).uniform(lo, hi, N)


def random_stable_siso(n: int, seed: int, rho_max: float = 0.95,
                       max_tries: int = 1000) -> StateSpace:
    """Random minimal SISO system with spectral radius below ``rho_max``.

    Draws are repeated until both properties hold; running out of attempts is
    an internal error, not a user error.
    """
    if not 1 <= n <= 3:
        raise ValueError(f"order must be in 1..3, got {n}")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        A = rng.standard_normal((n, n))
        rho = np.max(np.abs(np.linalg.eigvals(A)))
        A *= rng.uniform(0.2, rho_max) / rho
        sys = StateSpace(A, rng.standard_normal((n, 1)), rng.standard_normal((1, n)),
                         rng.standard_normal())
        if sys.spectral_radius() < rho_max and sys.is_minimal(rtol=1e-6):
            return sys
    raise RuntimeError(f"no minimal stable system found after {max_tries} draws (seed={seed})")
