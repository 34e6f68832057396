"""Closed-loop trajectories of the standard feedback loop computed from
open-loop plant data and a controller impulse response.

The loop is e = r - z, u = K e, z = G u with zero initial conditions. A
zero-initial-condition plant trajectory (u_hat, y_hat) of length L - nu taken
from the data page is mapped to a closed-loop signal pair by the 2x2 block
matrix returned by :func:`m_matrix`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dissipativity import (GAIN_ATOL, PSD_RTOL, Certificate, SupplyRate, _bisect_gain, certify,
                            estimate_feedthrough, oracle_check_dissipativity, orthonormal_range)
from .lti import ILL_POSED_TOL, Channel, IllPosedLoopError, StateSpace, feedback_interconnect, fir_realization
from .trajectory import DataPage, toeplitz


class NotRepresentableError(ValueError):
    """A requested closed-loop signal lies outside the data-based trajectory space."""


def m_matrix(a, channel: Channel | str) -> np.ndarray:
    """Block map from (u_hat; y_hat) to (r; channel output).

    r_to_z: [[I, T], [0, T]];  r_to_e: [[I, T], [I, 0]];  r_to_u: [[I, T], [T, 0]]
    with T the Toeplitz matrix of the controller impulse response ``a``.
    """
    channel = Channel.parse(channel)
    T = toeplitz(a)
    I = np.eye(T.shape[0])
    Z = np.zeros_like(T)
    bottom = {Channel.r_to_z: (Z, T), Channel.r_to_e: (I, Z), Channel.r_to_u: (T, Z)}[channel]
    return np.block([[I, T], [bottom[0], bottom[1]]])


@dataclass(frozen=True)
class ClosedLoopMap:
    Phi: np.ndarray
    channel: Channel
    a: np.ndarray

    @property
    def horizon(self) -> int:
        return self.a.size

    @property
    def top(self) -> np.ndarray:
        return self.Phi[: self.horizon]

    @property
    def bottom(self) -> np.ndarray:
        return self.Phi[self.horizon:]


def check_well_posed(page: DataPage, a) -> float:
    """Return 1 + D * a_0 with D estimated from data; raise if it vanishes."""
    D = estimate_feedthrough(page)
    denom = 1.0 + D * float(np.asarray(a).ravel()[0])
    if abs(denom) <= ILL_POSED_TOL:
        raise IllPosedLoopError(f"feedback loop is ill-posed: 1 + D*a_0 = {denom:.3e} (D={D:.6g})")
    return denom


def _check_horizon(page: DataPage, a) -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    if a.size != page.horizon:
        raise ValueError(f"controller impulse response has length {a.size}, "
                         f"expected L - nu = {page.horizon}")
    return a


def closed_loop_map(page: DataPage, a, channel: Channel | str = Channel.r_to_z) -> ClosedLoopMap:
    """Columns of the returned ``Phi`` span all zero-initial-condition
    closed-loop trajectories (r; w) of length L - nu for the channel."""
    a = _check_horizon(page, a)
    channel = Channel.parse(channel)
    check_well_posed(page, a)
    Phi = m_matrix(a, channel) @ page.N_stacked
    return ClosedLoopMap(Phi, channel, a)


def validate_closed_loop(page: DataPage, a, channel: Channel | str, sr: SupplyRate,
                         psd_rtol: float = PSD_RTOL, filter=None) -> Certificate:
    """(L - nu)-dissipativity of the closed-loop channel without a plant model.

    ``filter`` is an optional impulse response applied to the channel output
    before the supply rate is evaluated.
    """
    cl = closed_loop_map(page, a, channel)
    Phi = cl.Phi
    if filter is not None:
        w = np.asarray(filter, dtype=float).ravel()
        if w.size != page.horizon:
            raise ValueError(f"filter must have length {page.horizon}, got {w.size}")
        Phi = np.vstack([cl.top, toeplitz(w) @ cl.bottom])
    return certify(Phi, sr, page.horizon, psd_rtol)


def closed_loop_response(page: DataPage, a, channel: Channel | str, r_ref,
                         rtol: float = 1e-6) -> np.ndarray:
    """Zero-initial-condition response of the closed-loop channel to ``r_ref``.

    Uses the minimum-norm coefficient vector reproducing ``r_ref`` in the top
    block of the closed-loop map.

    Raises:
        NotRepresentableError: if the reference is not reproduced to within
            ``rtol * |r_ref|``.
    """
    cl = closed_loop_map(page, a, channel)
    r_ref = np.asarray(r_ref, dtype=float).ravel()
    if r_ref.size != page.horizon:
        raise ValueError(f"reference has length {r_ref.size}, expected {page.horizon}")
    beta, *_ = np.linalg.lstsq(cl.top, r_ref, rcond=None)
    resid = np.linalg.norm(cl.top @ beta - r_ref)
    if resid > rtol * np.linalg.norm(r_ref):
        raise NotRepresentableError(
            f"reference not representable: residual {resid:.3e} "
            f"(data not exciting enough or loop near ill-posed)")
    return cl.bottom @ beta


def closed_loop_l2_gain(page: DataPage, a, channel: Channel | str = Channel.r_to_z,
                        tol: float = 1e-9) -> float:
    """Finite-horizon L2 gain of the closed-loop channel, by bisection."""
    cl = closed_loop_map(page, a, channel)
    Z = orthonormal_range(cl.Phi)
    h = page.horizon
    Gtt, Gbb = Z[:h].T @ Z[:h], Z[h:].T @ Z[h:]

    def ok(gamma):
        return np.linalg.eigvalsh(gamma ** 2 * Gtt - Gbb)[0] >= -GAIN_ATOL * max(gamma ** 2, 1.0)

    return _bisect_gain(ok, tol)


def oracle_closed_loop(plant: StateSpace, a, channel: Channel | str) -> StateSpace:
    """Model-based loop with the FIR controller whose taps are ``a``."""
    return feedback_interconnect(plant, fir_realization(a), channel)


def oracle_validate_closed_loop(plant: StateSpace, a, channel: Channel | str, sr: SupplyRate,
                                psd_rtol: float = PSD_RTOL) -> Certificate:
    a = np.asarray(a, dtype=float).ravel()
    return oracle_check_dissipativity(oracle_closed_loop(plant, a, channel), a.size, sr, psd_rtol)
