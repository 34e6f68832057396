"""Hankel and Toeplitz operators, persistency of excitation, and the
zero-initial-condition trajectory subspace spanned by measured data.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .lti import Trajectory

log = logging.getLogger(__name__)

RANK_RTOL = 1e-9


class InsufficientDataError(ValueError):
    """The data cannot support the requested depth or excitation order."""


def hankel(x, L: int) -> np.ndarray:
    """Depth-``L`` Hankel matrix with entry (i, j) = x[i + j].

    >>> hankel([1, 2, 3, 4], 2)
    array([[1., 2., 3.],
           [2., 3., 4.]])
    """
    x = np.asarray(x, dtype=float).ravel()
    N = x.size
    if L < 1:
        raise ValueError(f"depth must be >= 1, got {L}")
    if L > N:
        raise InsufficientDataError(f"depth L={L} exceeds data length N={N}")
    return np.lib.stride_tricks.sliding_window_view(x, N - L + 1).copy()


def toeplitz(a) -> np.ndarray:
    """Lower-triangular Toeplitz matrix with first column ``a``.

    ``toeplitz(a) @ u`` is the zero-initial-condition convolution of ``a`` and ``u``.
    """
    a = np.asarray(a, dtype=float).ravel()
    L = a.size
    if L < 1:
        raise ValueError("need at least one coefficient")
    i, j = np.indices((L, L))
    return np.where(i >= j, a[np.clip(i - j, 0, None)], 0.0)


def numerical_rank(M: np.ndarray, rtol: float = RANK_RTOL) -> tuple[int, np.ndarray]:
    """Rank counting singular values above ``rtol * sigma_max``; also returns the singular values."""
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0, sv
    return int(np.sum(sv > rtol * sv[0])), sv


@dataclass(frozen=True)
class ExcitationReport:
    exciting: bool
    order: int
    rank: int
    columns: int
    reason: str = ""

    def __bool__(self):
        return self.exciting


def is_persistently_exciting(x, order: int, rank_tol: float = RANK_RTOL) -> ExcitationReport:
    """Check whether the depth-``order`` Hankel matrix of ``x`` has full row rank."""
    x = np.asarray(x, dtype=float).ravel()
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    cols = x.size - order + 1
    if cols < order:
        return ExcitationReport(False, order, min(max(cols, 0), order), max(cols, 0),
                                reason="insufficient data length")
    rank, _ = numerical_rank(hankel(x, order), rank_tol)
    reason = "" if rank == order else f"rank {rank} < {order}"
    return ExcitationReport(rank == order, order, rank, cols, reason)


def excitation_order(x, rank_tol: float = RANK_RTOL) -> int:
    """Largest order for which ``x`` is persistently exciting (0 if none)."""
    x = np.asarray(x, dtype=float).ravel()
    lo, hi = 0, (x.size + 1) // 2
    # PE of order k implies PE of every lower order, so bisect
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if is_persistently_exciting(x, mid, rank_tol):
            lo = mid
        else:
            hi = mid - 1
    return lo


def kernel_basis(Amat, rank_tol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the numerical kernel of ``Amat`` (columns)."""
    Amat = np.atleast_2d(np.asarray(Amat, dtype=float))
    ncols = Amat.shape[1]
    if Amat.shape[0] == 0:
        return np.eye(ncols)
    _, sv, vt = np.linalg.svd(Amat, full_matrices=True)
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
    return vt[rank:].T.copy()


def truncation_selectors(L: int, nu: int) -> tuple[np.ndarray, np.ndarray]:
    """Selectors dropping the first ``nu`` samples of a length-``L`` signal.

    Returns the single-signal selector of shape (L-nu, L) and its block-diagonal
    version of shape (2(L-nu), 2L) acting on stacked (u; y).
    """
    if not 0 < nu < L:
        raise ValueError(f"need 0 < nu < L, got nu={nu}, L={L}")
    J1 = np.hstack([np.zeros((L - nu, nu)), np.eye(L - nu)])
    Z = np.zeros_like(J1)
    return J1, np.block([[J1, Z], [Z, J1]])


def initial_window_selector(L: int, nu: int) -> np.ndarray:
    """Rows of the stacked (u; y) vector holding u_0..u_{nu-1} and y_0..y_{nu-1}."""
    S = np.zeros((2 * nu, 2 * L))
    S[np.arange(nu), np.arange(nu)] = 1.0
    S[nu + np.arange(nu), L + np.arange(nu)] = 1.0
    return S


@dataclass(frozen=True)
class DataPage:
    """Data matrices of one measured trajectory at depth ``L`` and window ``nu``.

    ``H`` is the stacked Hankel matrix [H_L(u); H_L(y)]. The columns of
    ``H @ V`` span every length-``L`` trajectory whose first ``nu`` inputs and
    outputs vanish. ``V`` has orthonormal columns and ``H @ V`` full column
    rank, so its width equals the dimension of that subspace (``L - nu`` for
    sufficiently rich data).
    """

    traj: Trajectory
    L: int
    nu: int
    n_bound: int
    H: np.ndarray
    V: np.ndarray
    J: np.ndarray
    J1: np.ndarray
    excitation: ExcitationReport

    @property
    def horizon(self) -> int:
        return self.L - self.nu

    @property
    def HV(self) -> np.ndarray:
        return self.H @ self.V

    @property
    def Nu(self) -> np.ndarray:
        """Truncated input part J1 H_L(u) V, shape (L-nu, dim V)."""
        return self.J1 @ self.H[: self.L] @ self.V

    @property
    def Ny(self) -> np.ndarray:
        """Truncated output part J1 H_L(y) V, shape (L-nu, dim V)."""
        return self.J1 @ self.H[self.L:] @ self.V

    @property
    def N_stacked(self) -> np.ndarray:
        return self.J @ self.HV


def build_data_page(traj: Trajectory, L: int, nu: int, n_bound: int,
                    rank_tol: float = RANK_RTOL) -> DataPage:
    """Build the data page for depth ``L`` and initial window ``nu``.

    The input must be persistently exciting of order ``L + n_bound``.
    ``n_bound`` is a user-supplied upper bound on the plant order.

    Raises:
        ValueError: if ``nu < n_bound`` or the depth does not fit the data.
        InsufficientDataError: if the excitation requirement fails; the
            message names the order actually achieved.
    """
    if n_bound < 1:
        raise ValueError(f"n_bound must be >= 1, got {n_bound}")
    if nu < n_bound:
        raise ValueError(f"nu={nu} must be at least the order bound n_bound={n_bound}")
    if not nu < L:
        raise ValueError(f"need nu < L, got nu={nu}, L={L}")
    if L > traj.N:
        raise InsufficientDataError(f"insufficient data: L={L} exceeds N={traj.N}")

    required = L + n_bound
    report = is_persistently_exciting(traj.u, required, rank_tol)
    if not report:
        achieved = excitation_order(traj.u, rank_tol)
        raise InsufficientDataError(
            f"insufficient data: input is persistently exciting of order {achieved}, "
            f"need {required} (L + n_bound); {report.reason}")
    if not is_persistently_exciting(traj.u, L + nu, rank_tol):
        log.warning("input is exciting of order L+n_bound=%d but not L+nu=%d", required, L + nu)

    H = np.vstack([hankel(traj.u, L), hankel(traj.y, L)])
    K = kernel_basis(initial_window_selector(L, nu) @ H, rank_tol)
    # drop directions in ker(H): they carry no trajectory and would make
    # the energy Gram matrix V'H'HV singular
    HK = H @ K
    if K.shape[1]:
        _, sv, vt = np.linalg.svd(HK, full_matrices=False)
        r = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
        V = K @ vt[:r].T
    else:
        V = K
    J1, J = truncation_selectors(L, nu)
    return DataPage(traj, L, nu, n_bound, H, V, J, J1, report)
