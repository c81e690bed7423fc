"""
Independent checks on solver output.

None of these routines call the dual-eigenvector construction used by the
solvers:

* :func:`receive_snr` measures per-stream SINR with an explicit linear
  receiver per stream.
* :func:`sdp_dual_single_stream` maximizes the dual of the relaxed
  single-stream program through a generalized eigenvalue pencil.
* :func:`oracle_min_power` searches the Stiefel manifold directly by random
  sampling, perturbation and a derivative-free local polish.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import optimize

from .errors import (CogBeamError, InfeasibleError, NumericalFailure, OracleNoFeasiblePoint,
                     ToleranceError)
from .feasibility import xi_min
from .model import DerivedModel, SnrMatrix, hermitian_evd, psd_power, random_stiefel
from .zfb import zfb_decomposition

__all__ = ['receive_snr', 'receive_filters', 'KktReport',
           'sdp_dual_single_stream', 'oracle_min_power',
           'random_feasible_power']


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Receive-side SNR xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def receive_filters(T: np.ndarray, H: np.ndarray, W: np.ndarray):
    """
    SINR-maximizing receive vectors and the SINR each one achieves.

    For stream ``i`` the signal covariance is ``M1 = H t_i t_i^H H^H`` and the
    interference-plus-noise covariance is
    ``M2 = sum_{k != i} H t_k t_k^H H^H + W``.  The Rayleigh quotient
    ``r M1 r^H / r M2 r^H`` is maximized by the dominant eigenvector of
    ``M2^-1/2 M1 M2^-1/2``.

    Returns
    -------
    snr : np.ndarray
        Achieved SINR per stream, in column order of ``T``.
    R : np.ndarray
        ``d x n`` matrix whose rows are the receive vectors.
    """
    T = np.asarray(T, dtype=complex)
    H = np.asarray(H, dtype=complex)
    W = np.asarray(W, dtype=complex)
    n = H.shape[0]
    d = T.shape[1]
    HT = H @ T
    total = HT @ HT.conj().T + W
    snr = np.empty(d)
    R = np.empty((d, n), dtype=complex)
    for i in range(d):
        h = HT[:, i:i + 1]
        M1 = h @ h.conj().T
        M2 = total - M1
        M2_isqrt = psd_power(M2, -0.5)
        w, U = hermitian_evd(M2_isqrt @ M1 @ M2_isqrt)
        r = (M2_isqrt @ U[:, 0]).conj()
        num = np.real(r @ M1 @ r.conj())
        den = np.real(r @ M2 @ r.conj())
        if not den > 0:
            raise NumericalFailure("receive filter has zero noise power")
        snr[i] = num / den
        R[i] = r
    return snr, R


def receive_snr(T: np.ndarray, H: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Per-stream SINR after optimal linear receive beamforming, descending."""
    snr, _ = receive_filters(T, H, W)
    return np.sort(snr)[::-1]


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Single-stream dual certificate xxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class KktReport:
    """
    Primal-dual certificate for a single stream.

    Uses the standard Lagrangian sign convention: the relaxed program is
    ``min tr(X)`` subject to ``tr(A X) <= xi``, ``tr(M X) = rho`` and
    ``X >= 0`` with ``A = H_x^H H_x``; its dual is
    ``max mu2 rho - mu1 xi`` subject to ``I + mu1 A - mu2 M >= 0``,
    ``mu1 >= 0``.

    Attributes
    ----------
    mu1, mu2 : float
        Dual multipliers of the interference and SNR constraints.
    dual_value, primal_value : float
    slack_interference : float
        ``xi - tr(A X)`` at the primal point.
    slack_snr : float
        ``tr(M X) - rho`` at the primal point.
    psd_min_eigenvalue : float
        Smallest eigenvalue of the dual slack matrix.
    complementary_residuals : tuple of float
        ``tr(X S)``, ``mu1 (tr(A X) - xi)`` and ``mu2 (tr(M X) - rho)``.
    """
    mu1: float
    mu2: float
    dual_value: float
    primal_value: float
    slack_interference: float
    slack_snr: float
    psd_min_eigenvalue: float
    complementary_residuals: tuple

    @property
    def gap(self) -> float:
        return self.primal_value - self.dual_value

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.primal_value))


def _best_mu2(I_plus, M):
    """Largest ``mu2`` with ``I_plus - mu2 M >= 0`` and a boundary vector."""
    w, X = scipy.linalg.eigh(M, I_plus)
    top = w[-1]
    if not top > 0:
        raise NumericalFailure("M has no positive generalized eigenvalue")
    return 1.0 / top, X[:, -1]


def sdp_dual_single_stream(derived: DerivedModel, rho1: float, xi: float,
                           primal=None) -> KktReport:
    """
    Maximize the single-stream dual and certify a primal beamformer.

    For each ``mu1`` the best ``mu2`` is the boundary of the pencil
    ``I + mu1 A - mu2 M >= 0``; the resulting concave function of ``mu1`` is
    maximized by bisection on its supergradient.

    Parameters
    ----------
    derived : DerivedModel
    rho1 : float
        SNR target of the single stream.
    xi : float
        Interference cap.
    primal : BeamformingSolution, optional
        Single-stream primal point to certify; computed with
        :func:`cogbeam.nfb.solve_nfb` when omitted.

    Raises
    ------
    InfeasibleError
        If ``xi`` is below the minimum achievable interference.
    ToleranceError
        If the duality gap cannot be closed to ``1e-4`` relative.
    """
    snr = SnrMatrix((float(rho1),))
    report = xi_min(derived, snr, xi)
    if not report.feasible:
        raise InfeasibleError(xi, report.xi_min)
    if primal is None:
        from .nfb import solve_nfb
        primal = solve_nfb(derived, snr, xi)
    if primal.d != 1:
        raise ValueError("certificate applies to a single stream only")

    M = np.asarray(derived.M)
    A = derived.H_x.conj().T @ derived.H_x
    m = M.shape[0]
    eye = np.eye(m)

    def evaluate(mu1):
        mu2, x = _best_mu2(eye + mu1 * A, M)
        # supergradient: rho * d(mu2)/d(mu1) - xi at the boundary vector
        slope = rho1 * np.real(x.conj() @ A @ x) / np.real(x.conj() @ M @ x) - xi
        return mu2 * rho1 - mu1 * xi, mu2, slope

    value0, mu2_0, slope0 = evaluate(0.0)
    if slope0 <= 0:
        mu1, value, mu2 = 0.0, value0, mu2_0
    else:
        lo, hi = 0.0, 1.0
        while evaluate(hi)[2] > 0:
            lo, hi = hi, 2 * hi
            if hi > 1e12:
                raise ToleranceError("dual line search found no upper bracket")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi) or hi - lo <= 1e-13 * hi:
                break
            if evaluate(mid)[2] > 0:
                lo = mid
            else:
                hi = mid
        candidates = [evaluate(lo) + (lo,), evaluate(hi) + (hi,)]
        value, mu2, _, mu1 = max(candidates, key=lambda c: c[0])

    t = primal.T[:, 0]
    X = np.outer(t, t.conj())
    S = eye + mu1 * A - mu2 * M
    tr_X = float(np.real(np.trace(X)))
    tr_AX = float(np.real(np.trace(A @ X)))
    tr_MX = float(np.real(np.trace(M @ X)))
    residuals = (float(np.real(np.trace(X @ S))),
                 float(mu1 * (tr_AX - xi)),
                 float(mu2 * (tr_MX - rho1)))
    kkt = KktReport(
        mu1=float(mu1), mu2=float(mu2), dual_value=float(value),
        primal_value=tr_X, slack_interference=float(xi - tr_AX),
        slack_snr=float(tr_MX - rho1),
        psd_min_eigenvalue=float(hermitian_evd(S)[0][-1]),
        complementary_residuals=residuals,
    )
    if abs(kkt.gap) > 1e-4 * kkt.scale:
        raise ToleranceError(f"duality gap {kkt.gap:.3g} could not be closed")
    return kkt


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Brute-force Stiefel oracle xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def _orthonormalize(X):
    """
    Q factor of ``X`` with positive real ``R`` diagonal, batched.

    Modified Gram-Schmidt with one reorthogonalization pass; far cheaper
    than LAPACK QR for the few-column matrices used here.
    """
    X = np.array(X, dtype=complex)
    for j in range(X.shape[-1]):
        v = X[..., :, j]
        for _ in range(2):
            for k in range(j):
                u = X[..., :, k]
                v = v - u * np.sum(u.conj() * v, axis=-1, keepdims=True)
        norm = np.sqrt(np.sum(v.real ** 2 + v.imag ** 2, axis=-1, keepdims=True))
        X[..., :, j] = v / norm
    return X


class _ReducedProblem:
    """Power and interference of ``V = U_r Z`` in ``range(M)`` coordinates."""

    def __init__(self, derived: DerivedModel, snr: SnrMatrix):
        self.rho = snr.values
        self.d = snr.d
        self.r = derived.rank_M
        self.inv_mu = 1.0 / derived.mu
        # leakage written out from the channels: H_x U_r diag(mu^-1/2)
        self.B = (derived.H_x @ derived.range_basis) * derived.mu[None, :] ** -0.5

    def power(self, Z):
        return np.einsum('...ij,i,j->...', np.abs(Z) ** 2, self.inv_mu, self.rho)

    def interference(self, Z):
        BZ = self.B @ Z
        return np.einsum('...ij,j->...', np.abs(BZ) ** 2, self.rho)

    def unpack(self, theta):
        half = theta.size // 2
        X = (theta[:half] + 1j * theta[half:]).reshape(self.r, self.d)
        return _orthonormalize(X)

    @staticmethod
    def pack(Z):
        flat = Z.ravel()
        return np.concatenate([flat.real, flat.imag])


def _perturb_refine(problem, Z, cap, rng, scale=0.5, floor=1e-9, trials=50):
    best_p = float(problem.power(Z))
    while scale >= floor:
        G = rng.standard_normal((trials,) + Z.shape) + 1j * rng.standard_normal((trials,) + Z.shape)
        cand = _orthonormalize(Z[None] + scale * G)
        p = problem.power(cand)
        ok = problem.interference(cand) <= cap
        if np.any(ok):
            idx = np.flatnonzero(ok)[np.argmin(p[ok])]
            if p[idx] < best_p:
                Z, best_p = cand[idx], float(p[idx])
                continue
        scale *= 0.5
    return Z, best_p


def _polish(problem, Z, cap, rounds=3):
    """
    Derivative-free SLSQP on the QR parameterization.

    SLSQP may finish a hair outside the cap; such points are pulled back
    toward the previous feasible point, so the result is always feasible.
    """
    margin = cap * (1 - 1e-11)
    best_p = float(problem.power(Z))
    for _ in range(rounds):
        res = optimize.minimize(
            lambda th: float(problem.power(problem.unpack(th))),
            problem.pack(Z), method='SLSQP',
            constraints=[{'type': 'ineq',
                          'fun': lambda th: margin - float(problem.interference(problem.unpack(th)))}],
            options={'maxiter': 400, 'ftol': 1e-15})
        Zp = problem.unpack(res.x)
        if problem.interference(Zp) > cap:
            Zp = _pull_inside(problem, Z[None], Zp[None], cap, steps=60)[0]
        p = float(problem.power(Zp))
        if not p < best_p * (1 - 1e-14):
            break
        Z, best_p = Zp, p
    return Z


def oracle_min_power(derived: DerivedModel, snr: SnrMatrix, xi: float,
                     budget: int = 2000, seed: int = 0, refine: int = 3,
                     polish: bool = True):
    """
    Best feasible transmit power found by direct search on the Stiefel manifold.

    ``budget`` Haar-random Stiefel points in ``range(M)`` are drawn; the
    ``refine`` cheapest feasible ones are improved by random perturbation
    with re-orthonormalization (scale halved from 0.5 to 1e-9, 50 trials per
    scale); when ``polish`` is set each is then finished by an SLSQP step
    that never leaves the feasible set.  The result is an upper bound on the true
    minimum.

    Returns
    -------
    power : float
    V : np.ndarray
        ``m x d`` Stiefel factor achieving ``power``.

    Raises
    ------
    OracleNoFeasiblePoint
        If no sample satisfies the interference cap.
    """
    derived.require_streams(snr.d)
    rng = np.random.default_rng(seed)
    problem = _ReducedProblem(derived, snr)
    cap = float(xi) * (1 + 1e-9)
    Z = random_stiefel(rng, problem.r, problem.d, size=budget)
    p = problem.power(Z)
    leak = problem.interference(Z)
    ok = np.flatnonzero(leak <= cap)
    starts = [Z[i] for i in ok[np.argsort(p[ok])][:refine]]
    if len(starts) < refine:
        # thin feasible set: push the least-leaking samples inside it
        for i in np.argsort(leak)[:refine - len(starts)]:
            Zr = _restore(problem, Z[i], cap)
            if Zr is not None:
                starts.append(Zr)
    if not starts:
        raise OracleNoFeasiblePoint(
            f"no feasible point among {budget} samples at xi={xi:.6g}")
    best_p, best_Z = np.inf, None
    for Zi in starts:
        Zi, pi = _perturb_refine(problem, Zi, cap, rng)
        if polish:
            # polishing every start avoids settling in a poor local minimum
            Zi = _polish(problem, Zi, cap)
            pi = float(problem.power(Zi))
        if pi < best_p:
            best_p, best_Z = pi, Zi
    return best_p, derived.lift(best_Z)


def _restore(problem, Z, cap):
    """Derivative-free descent on interference until the cap is met."""
    res = optimize.minimize(
        lambda th: float(problem.interference(problem.unpack(th))),
        problem.pack(Z), method='BFGS',
        options={'maxiter': 2000})
    Zr = problem.unpack(res.x)
    if problem.interference(Zr) <= cap:
        return Zr
    return None


def _null_anchor(derived, snr, rng, samples):
    """Haar samples inside the interference-free subspace, or None."""
    try:
        N = zfb_decomposition(derived).V_R
    except CogBeamError:
        return None
    k = N.shape[1]
    if k < snr.d:
        return None
    basis = derived.range_basis.conj().T @ N
    return basis @ random_stiefel(rng, k, snr.d, size=samples)


def _pull_inside(problem, Z0, Z1, cap, steps=30):
    """Bisect ``t`` on ``orth((1-t) Z0 + t Z1)`` keeping the feasible end."""
    lo = np.zeros(len(Z1))
    hi = np.ones(len(Z1))
    for _ in range(steps):
        t = 0.5 * (lo + hi)
        Z = _orthonormalize((1 - t)[:, None, None] * Z0 + t[:, None, None] * Z1)
        ok = problem.interference(Z) <= cap
        lo = np.where(ok, t, lo)
        hi = np.where(ok, hi, t)
    return _orthonormalize((1 - lo)[:, None, None] * Z0 + lo[:, None, None] * Z1)


def random_feasible_power(derived: DerivedModel, snr: SnrMatrix, xi: float,
                          samples: int = 100, seed: int = 0):
    """
    Mean power of random beamformers that meet both constraints.

    Haar samples on ``range(M)`` that violate the cap are pulled toward a
    Haar sample of the interference-free subspace, along the
    re-orthonormalized segment, until they meet it.  Without such a subspace
    violating samples are discarded.  Returns None when no sample survives.
    """
    derived.require_streams(snr.d)
    rng = np.random.default_rng(seed)
    problem = _ReducedProblem(derived, snr)
    xi = float(xi)
    Z = random_stiefel(rng, problem.r, problem.d, size=samples)
    anchor = _null_anchor(derived, snr, rng, samples)
    bad = problem.interference(Z) > xi
    if anchor is not None:
        if np.any(bad):
            Z[bad] = _pull_inside(problem, anchor[bad], Z[bad], xi)
        ok = problem.interference(Z) <= max(xi, 0.0) + 1e-12 * problem.power(Z)
    else:
        ok = ~bad
    if not np.any(ok):
        return None
    return float(np.mean(problem.power(Z[ok])))
