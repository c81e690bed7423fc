"""Minimum achievable interference and the secondary access decision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (DerivedModel, ScenarioConfig, SnrMatrix, build_derived,
                    gram_evd, rank_tolerance, sample_channels)

__all__ = ['FeasibilityReport', 'xi_min', 'min_trace_pairing',
           'reduced_leakage_eigenvalues', 'access_probability']


@dataclass(frozen=True)
class FeasibilityReport:
    """
    Outcome of the access test.

    Attributes
    ----------
    xi_min : float
        Minimum interference any beamformer meeting the SNR targets causes.
    mx_eigenvalues : np.ndarray
        Eigenvalues of the leakage matrix on ``range(M)``, descending, with
        numerically-zero values clamped to exactly zero.
    feasible : bool
        ``xi >= xi_min``.
    slack : float
        ``xi - xi_min``.
    """
    xi_min: float
    mx_eigenvalues: np.ndarray
    feasible: bool
    slack: float


def min_trace_pairing(weights: np.ndarray, eigenvalues: np.ndarray) -> float:
    """
    ``min tr(D Theta^H Omega Theta)`` over Stiefel ``Theta``.

    Pairs the ``i``-th largest weight with the ``i``-th smallest eigenvalue.

    Parameters
    ----------
    weights : np.ndarray
        Diagonal of ``D``, descending.
    eigenvalues : np.ndarray
        Eigenvalues of ``Omega``, descending, at least as many as weights.
    """
    weights = np.asarray(weights, dtype=float)
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    u = weights.size
    if eigenvalues.size < u:
        raise ValueError("need at least as many eigenvalues as weights")
    smallest_first = eigenvalues[::-1][:u]
    return float(np.dot(weights, smallest_first))


def reduced_leakage_eigenvalues(derived: DerivedModel) -> np.ndarray:
    """
    Descending eigenvalues of ``M_x`` restricted to ``range(M)``.

    Equal to the full spectrum of ``M_x`` when ``M`` is nonsingular.
    """
    w, _ = gram_evd(derived.Bx_reduced)
    w[w <= rank_tolerance(w, derived.m)] = 0.0
    return w


def xi_min(derived: DerivedModel, snr: SnrMatrix, xi: float = np.inf) -> FeasibilityReport:
    """
    Minimum achievable interference for the SNR targets and access verdict.

    Parameters
    ----------
    derived : DerivedModel
    snr : SnrMatrix
    xi : float, optional
        Interference cap to test; defaults to no cap.

    Raises
    ------
    RankError
        If ``snr.d > rank(M)``.
    """
    derived.require_streams(snr.d)
    x = reduced_leakage_eigenvalues(derived)
    value = min_trace_pairing(snr.values, x)
    slack = float(xi) - value
    return FeasibilityReport(xi_min=value, mx_eigenvalues=x,
                             feasible=bool(slack >= 0), slack=slack)


def access_probability(config: ScenarioConfig, trials: int,
                       xi: float = None) -> float:
    """
    Monte-Carlo probability that ``xi_min <= xi`` over i.i.d. channels.

    Trial ``k`` uses the channel stream ``(config.seed, k)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if xi is None:
        xi = config.xi
    snr = config.snr
    hits = 0
    for k in range(trials):
        derived = build_derived(sample_channels(config, k), config)
        if xi_min(derived, snr, xi).feasible:
            hits += 1
    return hits / trials
