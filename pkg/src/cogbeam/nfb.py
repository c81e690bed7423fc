"""
Nonzero-forcing beamformer through the one-dimensional Lagrange dual.

For a multiplier ``y >= 0`` the Lagrangian is minimized by the ``d``
eigenvectors of ``M^-1 + y M_x`` with the smallest eigenvalues, the
largest SNR target taking the smallest eigenvalue.  Transmit power grows and
interference shrinks monotonically with ``y``, so the optimal multiplier is
the smallest ``y`` whose interference meets the cap.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import InfeasibleError, NumericalFailure, ToleranceError
from .feasibility import xi_min
from .model import DerivedModel, SnrMatrix
from .solution import NFB, BeamformingSolution, assemble_solution

__all__ = ['v_of_y', 'power_and_interference_at', 'dual_function',
           'solve_nfb', 'lower_bound_power', 'Y_MAX']

log = logging.getLogger(__name__)

Y_MAX = 1e12
# relative interference tolerance of the multiplier search
XI_RTOL = 1e-9


def _reduced_eig(derived: DerivedModel, y: float):
    # diagonal plus a Hermitian matrix: exactly Hermitian, no symmetrization
    K = y * derived.Mx_reduced
    K[np.diag_indices_from(K)] += 1.0 / derived.mu
    try:
        lam, Z = np.linalg.eigh(K)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver failed at y={y!r}: {exc}") from exc
    return lam, Z


def v_of_y(derived: DerivedModel, snr: SnrMatrix, y: float):
    """
    Lagrangian minimizer at multiplier ``y``.

    The eigenproblem is solved on ``range(M)``; when ``M`` is singular the
    null-space directions are excluded because they cannot carry signal.

    Returns
    -------
    V_y : np.ndarray
        ``m x d`` orthonormal eigenvectors for the ``d`` smallest eigenvalues
        of ``M^-1 + y M_x``, smallest first.
    eigenvalues : np.ndarray
        All ``rank(M)`` eigenvalues, ascending.
    """
    if not y >= 0:
        raise ValueError(f"multiplier must be nonnegative, got {y!r}")
    derived.require_streams(snr.d)
    lam, Z = _reduced_eig(derived, y)
    return derived.lift(Z[:, :snr.d]), lam


def _traces(derived, rho, y):
    lam, Z = _reduced_eig(derived, y)
    Zd = Z[:, :rho.size]
    weight = Zd.real ** 2 + Zd.imag ** 2
    power = float(rho @ (weight.T @ (1.0 / derived.mu)))
    BZ = derived.Bx_reduced @ Zd
    leak = (BZ.real ** 2 + BZ.imag ** 2).sum(axis=0)
    return power, float(rho @ leak), lam


def power_and_interference_at(derived: DerivedModel, snr: SnrMatrix, y: float):
    """``(tr(Sigma V_y^H M^-1 V_y), tr(Sigma V_y^H M_x V_y))`` at multiplier ``y``."""
    if not y >= 0:
        raise ValueError(f"multiplier must be nonnegative, got {y!r}")
    derived.require_streams(snr.d)
    power, interference, _ = _traces(derived, snr.values, y)
    return power, interference


def dual_function(derived: DerivedModel, snr: SnrMatrix, y: float, xi: float) -> float:
    """``g(y) = sum_i rho_i lambda_i(y) - y xi``."""
    derived.require_streams(snr.d)
    lam, _ = _reduced_eig(derived, y)
    return float(np.dot(snr.values, lam[:snr.d]) - y * xi)


def lower_bound_power(derived: DerivedModel, snr: SnrMatrix) -> float:
    """Minimum power with the interference constraint dropped: ``sum rho_i / mu_i``."""
    derived.require_streams(snr.d)
    return float(np.sum(snr.values / derived.mu[:snr.d]))


def solve_nfb(derived: DerivedModel, snr: SnrMatrix, xi: float) -> BeamformingSolution:
    """
    Minimum-power beamformer with interference at most ``xi``.

    Parameters
    ----------
    derived : DerivedModel
    snr : SnrMatrix
    xi : float
        Interference cap, linear.

    Returns
    -------
    BeamformingSolution
        ``mode='NFB'`` with the optimal multiplier ``y``.  When ``xi == 0``
        and zero forcing is possible the zero-forcing solution is returned.

    Raises
    ------
    InfeasibleError
        If ``xi`` is below the minimum achievable interference.
    ToleranceError
        If ``xi`` is so close to the minimum achievable interference that no
        multiplier below ``Y_MAX`` meets it.
    """
    xi = float(xi)
    if not xi >= 0:
        raise ValueError("xi must be nonnegative")
    report = xi_min(derived, snr, xi)
    if not report.feasible:
        raise InfeasibleError(xi, report.xi_min)
    if xi == 0.0:
        from .zfb import solve_zfb
        return solve_zfb(derived, snr)

    rho = snr.values
    _, interf0, _ = _traces(derived, rho, 0.0)
    if interf0 <= xi:
        V, _ = v_of_y(derived, snr, 0.0)
        return assemble_solution(derived, snr, V, NFB, y=0.0, xi=xi)

    def excess(y):
        return _traces(derived, rho, y)[1] - xi

    lo, hi = 0.0, 1.0
    f_lo, f_hi = interf0 - xi, excess(hi)
    while f_hi > 0:
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = excess(hi)
        if hi > Y_MAX:
            raise ToleranceError(
                f"interference cap {xi:.6g} is within numerical reach of the "
                f"minimum {report.xi_min:.6g}; no multiplier below {Y_MAX:g} "
                "meets it")

    tol = XI_RTOL * xi
    y_star, warning = _find_multiplier(excess, lo, hi, tol, f_lo, f_hi)
    V, _ = v_of_y(derived, snr, y_star)
    sol = assemble_solution(derived, snr, V, NFB, y=y_star, xi=xi,
                            warning=warning)
    if sol.interference > xi * (1 + 1e-8):
        raise NumericalFailure(
            f"returned interference {sol.interference!r} exceeds cap {xi!r}")
    return sol


def _find_multiplier(excess, lo, hi, tol, f_lo=None, f_hi=None):
    """
    Smallest feasible multiplier in ``[lo, hi]``, to within ``tol``.

    ``excess`` is decreasing with ``excess(lo) > 0 >= excess(hi)``.  The
    bracket is shrunk by the Illinois variant of regula falsi, falling back
    to bisection whenever an interpolation step makes little progress.  The
    returned point always satisfies ``-tol <= excess <= 0``, unless the
    bracket collapses first, in which case the feasible end is returned with
    a warning.
    """
    if f_lo is None:
        f_lo = excess(lo)
    if f_hi is None:
        f_hi = excess(hi)
    if f_hi >= -tol:
        return hi, None
    side = 0
    while True:
        width = hi - lo
        if width <= 1e-14 * hi:
            warning = (f"multiplier search stalled at width {width:.3g}; "
                       f"interference {-f_hi:.3g} below the cap")
            log.warning(warning)
            return hi, warning
        y = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        if not lo < y < hi or side in (-3, 3):
            y = 0.5 * (lo + hi)
            side = 0
        f = excess(y)
        if -tol <= f <= 0:
            return y, None
        if f > 0:
            lo, f_lo = y, f
            side = side + 1 if side > 0 else 1
            if side > 1:
                f_hi *= 0.5
        else:
            hi, f_hi = y, f
            side = side - 1 if side < 0 else -1
            if side < -1:
                f_lo *= 0.5
