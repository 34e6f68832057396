"""Quadratic supply rates and finite-horizon dissipativity tests.

All verdicts are computed as the smallest value of the supply quadratic form
over unit-energy trajectories of a subspace (a generalized eigenvalue of the
pencil (Phi' Pi Phi, Phi' Phi)). The number is independent of the basis used
for the subspace, so data-based and model-based margins are comparable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lti import StateSpace, impulse_response
from .trajectory import RANK_RTOL, DataPage, toeplitz

PSD_RTOL = 1e-8
# gain bisection tests the sign itself; only round-off is tolerated
GAIN_ATOL = 1e-13


@dataclass(frozen=True)
class SupplyRate:
    """Scalar supply s(u, y) = Q u^2 + 2 S u y + R y^2."""

    Q: float
    S: float
    R: float

    def __post_init__(self):
        for name in ("Q", "S", "R"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValueError(f"supply entry {name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def l2_gain(cls, gamma: float) -> "SupplyRate":
        return cls(gamma ** 2, 0.0, -1.0)

    @classmethod
    def passivity(cls) -> "SupplyRate":
        return cls(0.0, 0.5, 0.0)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.Q, self.S], [self.S, self.R]])

    def norm(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))

    def scaled(self, c: float) -> "SupplyRate":
        return SupplyRate(c * self.Q, c * self.S, c * self.R)

    def to_dict(self) -> dict:
        return {"Q": self.Q, "S": self.S, "R": self.R}


@dataclass(frozen=True)
class Certificate:
    dissipative: bool
    margin: float
    matrix_dim: int
    tolerance: float
    horizon: int

    def __bool__(self):
        return self.dissipative

    def to_dict(self) -> dict:
        return {"dissipative": self.dissipative, "margin": self.margin,
                "matrix_dim": self.matrix_dim, "tolerance": self.tolerance,
                "horizon": self.horizon}


def block_supply(sr: SupplyRate, L: int) -> np.ndarray:
    """Supply matrix acting on stacked (u; y) of length ``L``: [[Q I, S I], [S I, R I]]."""
    if L < 1:
        raise ValueError(f"horizon must be >= 1, got {L}")
    return np.kron(sr.matrix, np.eye(L))


def orthonormal_range(Phi: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    U, sv, _ = np.linalg.svd(Phi, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        return U[:, :0]
    return U[:, sv > rtol * sv[0]]


def pencil_margin(Phi: np.ndarray, Pi: np.ndarray) -> float:
    """min over x in col(Phi), |x| = 1, of x' Pi x.

    Equals the smallest finite eigenvalue of the pencil (Phi' Pi Phi, Phi' Phi).
    """
    Z = orthonormal_range(Phi)
    if Z.shape[1] == 0:
        raise ValueError("empty trajectory subspace")
    return float(np.linalg.eigvalsh(Z.T @ Pi @ Z)[0])


def certify(Phi: np.ndarray, sr: SupplyRate, horizon: int,
            psd_rtol: float = PSD_RTOL) -> Certificate:
    margin = pencil_margin(Phi, block_supply(sr, Phi.shape[0] // 2))
    tol = psd_rtol * max(sr.norm(), np.finfo(float).tiny)
    return Certificate(margin >= -tol, margin, Phi.shape[1], tol, horizon)


def check_open_loop(page: DataPage, sr: SupplyRate, psd_rtol: float = PSD_RTOL) -> Certificate:
    """Data-based (L - nu)-dissipativity test of the measured plant.

    The quadratic form V'H' Pi_L H V is evaluated on length-L trajectories
    whose first ``nu`` samples vanish; the supply over the full depth equals
    the supply over the last ``L - nu`` samples.
    """
    if page.V.shape[1] == 0:
        raise ValueError("nu too large for data length: no zero-initial-condition "
                         "trajectories are representable")
    return certify(page.HV, sr, page.horizon, psd_rtol)


def estimate_feedthrough(page: DataPage) -> float:
    """Feedthrough of the measured plant read off a data-built impulse.

    A trajectory with zero initial window and input e_nu is assembled from the
    columns of H V; its output at step ``nu`` is D.
    """
    L, nu = page.L, page.nu
    HV = page.HV
    target = np.zeros(L)
    target[nu] = 1.0
    beta, *_ = np.linalg.lstsq(HV[:L], target, rcond=None)
    resid = np.linalg.norm(HV[:L] @ beta - target)
    if resid > 1e-6:
        raise ValueError(f"data cannot represent an input impulse at step {nu} "
                         f"(residual {resid:.2e}); data is degenerate")
    return float(HV[L + nu] @ beta)


def _bisect_gain(is_dissipative, tol: float, gamma_hi: float = 1.0, max_doublings: int = 200) -> float:
    lo = 0.0
    hi = gamma_hi
    for _ in range(max_doublings):
        if is_dissipative(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ValueError("gain bound grew without bound; subspace may be degenerate")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_dissipative(mid):
            hi = mid
        else:
            lo = mid
    return hi


def finite_horizon_l2_gain(page: DataPage, tol: float = 1e-9) -> float:
    """Smallest gamma (within ``tol``) for which the data pass the L2-gain test.

    Bisection on gamma; the verdict is monotone in gamma.
    """
    HV = page.HV
    Z = orthonormal_range(HV)
    # eigenvalues of Z'Pi_L Z for each gamma reuse the fixed basis
    Zu, Zy = Z[: page.L], Z[page.L:]
    Guu, Gyy = Zu.T @ Zu, Zy.T @ Zy

    def ok(gamma):
        margin = np.linalg.eigvalsh(gamma ** 2 * Guu - Gyy)[0]
        return margin >= -GAIN_ATOL * max(gamma ** 2, 1.0)

    return _bisect_gain(ok, tol)


def oracle_check_dissipativity(sys: StateSpace, L: int, sr: SupplyRate,
                               psd_rtol: float = PSD_RTOL) -> Certificate:
    """Model-based L-dissipativity over all zero-initial-condition trajectories.

    Every such trajectory is (u, T_L(g) u) for a free input u, g being the
    impulse response of ``sys``.
    """
    T = toeplitz(impulse_response(sys, L))
    return certify(np.vstack([np.eye(L), T]), sr, L, psd_rtol)


def oracle_l2_gain(sys: StateSpace, L: int) -> float:
    """Largest singular value of the horizon-``L`` Toeplitz operator of ``sys``."""
    return float(np.linalg.norm(toeplitz(impulse_response(sys, L)), 2))

