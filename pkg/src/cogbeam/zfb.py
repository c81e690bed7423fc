"""
Closed-form zero-forcing beamformer.

The secondary signal is confined to the part of ``range(M)`` that the
primary receiver cannot see, and inside that subspace the strongest SNR
target is paired with the cheapest direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientNullSpace, NumericalFailure, RankError
from .model import DerivedModel, SnrMatrix, hermitize
from .solution import ZFB, BeamformingSolution, assemble_solution

__all__ = ['ZfbDecomposition', 'zfb_decomposition', 'solve_zfb',
           'zfb_q_family', 'q_family_member', 'zfb_transmit_matrix']


@dataclass(frozen=True, eq=False)
class ZfbDecomposition:
    """
    Subspace factors of the zero-forcing construction.

    Attributes
    ----------
    V1 : np.ndarray
        ``q x m`` right singular vectors of ``H_x`` (rows orthonormal).
    V2 : np.ndarray
        ``q x m`` right singular vectors of ``V1 M^-1/2`` (rows orthonormal).
    R : np.ndarray
        ``m x m`` Hermitian PSD, ``P M^-1 P`` with ``P = I - V2^H V2``.
    V_R : np.ndarray
        Orthonormal eigenvectors of ``R`` for its nonzero eigenvalues.
    lambda_R : np.ndarray
        Those nonzero eigenvalues, ascending.
    """
    V1: np.ndarray
    V2: np.ndarray
    R: np.ndarray
    V_R: np.ndarray
    lambda_R: np.ndarray

    @property
    def null_dim(self) -> int:
        return self.V_R.shape[1]


def zfb_decomposition(derived: DerivedModel) -> ZfbDecomposition:
    """
    Compute ``V1``, ``V2``, ``R`` and the ascending eigenpairs of ``R``.

    Raises
    ------
    RankError
        If ``H_x`` or ``V1 M^-1/2`` is numerically rank deficient.
    InsufficientNullSpace
        If no direction in ``range(M)`` is invisible to the primary receiver.
    """
    H_x = derived.H_x
    q, m = H_x.shape
    U_r, mu = derived.range_basis, derived.mu
    r = derived.rank_M

    try:
        _, a1, Vh1 = np.linalg.svd(H_x, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD of H_x failed: {exc}") from exc
    if a1.size < q or a1[-1] <= max(q, m) * np.finfo(float).eps * a1[0]:
        raise RankError("H_x is rank deficient")
    V1 = Vh1[:q]

    if r <= q:
        raise InsufficientNullSpace(
            f"rank(M)={r} leaves no dimension outside the {q}-dimensional "
            "primary receiver subspace")

    # V1 M^-1/2 = B_r U_r^H, so its SVD is taken in range(M) coordinates
    B_r = (V1 @ U_r) * mu[None, :] ** -0.5
    try:
        _, a2, Vh2 = np.linalg.svd(B_r, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD of V1 M^-1/2 failed: {exc}") from exc
    if a2[-1] <= max(q, r) * np.finfo(float).eps * a2[0]:
        raise RankError("V1 M^-1/2 is numerically rank deficient")
    V2 = Vh2[:q] @ U_r.conj().T
    N = U_r @ Vh2[q:].conj().T

    P = np.eye(m) - V2.conj().T @ V2
    R = hermitize(P @ derived.M_inv @ P)

    lam, Z = np.linalg.eigh(hermitize(N.conj().T @ derived.M_inv @ N))
    V_R = N @ Z
    for A in (V1, V2, R, V_R, lam):
        A.setflags(write=False)
    return ZfbDecomposition(V1=V1, V2=V2, R=R, V_R=V_R, lambda_R=lam)


def zfb_q_family(snr: SnrMatrix, rtol: float = 1e-12) -> tuple:
    """
    Block sizes of the optimal rotation family.

    Streams with equal SNR targets may be rotated among themselves by any
    unitary block without changing power or interference; this returns the
    sizes ``(n_1, ..., n_K)`` of those runs of equal targets.
    """
    values = snr.values
    sizes = [1]
    for prev, cur in zip(values[:-1], values[1:]):
        if np.isclose(cur, prev, rtol=rtol, atol=0.0):
            sizes[-1] += 1
        else:
            sizes.append(1)
    return tuple(sizes)


def q_family_member(blocks, rows: int, rng: np.random.Generator) -> np.ndarray:
    """
    Random ``rows x d`` matrix ``[blockdiag(Q_1, ..., Q_K); 0]`` with Haar
    unitary blocks of the given sizes.
    """
    d = int(sum(blocks))
    if rows < d:
        raise ValueError("rows must be at least the number of streams")
    Q = np.zeros((rows, d), dtype=complex)
    start = 0
    for size in blocks:
        G = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
        U, R = np.linalg.qr(G)
        diag = np.diagonal(R)
        Q[start:start + size, start:start + size] = U * (diag / np.abs(diag))
        start += size
    return Q


def zfb_transmit_matrix(derived: DerivedModel, decomposition: ZfbDecomposition,
                        snr: SnrMatrix, Q: np.ndarray = None) -> np.ndarray:
    """``M^-1/2 V_R Q Sigma^1/2``; ``Q`` defaults to ``[I_d; 0]``."""
    d = snr.d
    if Q is None:
        V = decomposition.V_R[:, :d]
    else:
        V = decomposition.V_R @ Q
    return derived.transmit_matrix(V, snr)


def solve_zfb(derived: DerivedModel, snr: SnrMatrix) -> BeamformingSolution:
    """
    Minimum-power beamformer causing zero interference at the primary receiver.

    Parameters
    ----------
    derived : DerivedModel
    snr : SnrMatrix

    Returns
    -------
    BeamformingSolution
        ``mode='ZFB'``, ``y=None``.

    Raises
    ------
    InsufficientNullSpace
        If fewer than ``d`` interference-free directions exist.
    RankError
        If ``d > rank(M)`` or a subspace factor is rank deficient.
    """
    d = snr.d
    derived.require_streams(d)
    if derived.m - derived.q < d:
        raise InsufficientNullSpace(
            f"m - q = {derived.m - derived.q} < d = {d}")
    dec = zfb_decomposition(derived)
    if dec.null_dim < d:
        raise InsufficientNullSpace(
            f"only {dec.null_dim} interference-free directions in range(M), "
            f"need {d}")
    V = np.array(dec.V_R[:, :d])
    sol = assemble_solution(derived, snr, V, ZFB, y=None, xi=0.0)
    expected = float(np.dot(snr.values, dec.lambda_R[:d]))
    if not np.isclose(sol.power, expected, rtol=1e-8, atol=0.0):
        raise NumericalFailure(
            f"ZFB power {sol.power!r} disagrees with eigenvalue sum {expected!r}")
    return sol
