"""The beamforming solution record returned by both solvers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import DerivedModel, SnrMatrix, hermitian_evd

__all__ = ['BeamformingSolution', 'ZFB', 'NFB', 'assemble_solution']

ZFB = 'ZFB'
NFB = 'NFB'


@dataclass(frozen=True, eq=False)
class BeamformingSolution:
    """
    Transmit beamformer together with the quantities it achieves.

    Attributes
    ----------
    T : np.ndarray
        ``m x d`` transmit beamforming matrix.
    V : np.ndarray
        ``m x d`` Stiefel factor with ``T = M^-1/2 V Sigma^1/2``.
    y : float or None
        Dual multiplier of the interference constraint; None in ZFB mode.
    power : float
        ``tr(T^H T)``.
    interference : float
        ``tr(T^H H_x^H H_x T)``.
    per_stream_snr : np.ndarray
        Eigenvalues of ``T^H M T``, descending.
    mode : str
        ``'ZFB'`` or ``'NFB'``.
    snr_targets : tuple
        Targets the solution was computed for, descending.
    xi : float or None
        Interference cap the solution was computed for.
    warning : str or None
        Set when the multiplier search stopped on its interval-width guard
        instead of the interference tolerance.
    """
    T: np.ndarray
    V: np.ndarray
    y: Optional[float]
    power: float
    interference: float
    per_stream_snr: np.ndarray
    mode: str
    snr_targets: tuple
    xi: Optional[float] = None
    warning: Optional[str] = None

    @property
    def d(self) -> int:
        return self.T.shape[1]


def assemble_solution(derived: DerivedModel, snr: SnrMatrix, V: np.ndarray,
                      mode: str, y: Optional[float] = None,
                      xi: Optional[float] = None,
                      warning: Optional[str] = None) -> BeamformingSolution:
    """Form ``T`` from ``V`` and evaluate power, interference and SNRs on it."""
    T = derived.transmit_matrix(V, snr)
    leak = derived.H_x @ T
    power = float(np.sum(np.abs(T) ** 2))
    interference = float(np.sum(np.abs(leak) ** 2))
    snrs, _ = hermitian_evd(T.conj().T @ derived.M @ T)
    for A in (T, V, snrs):
        A.setflags(write=False)
    return BeamformingSolution(T=T, V=V, y=y, power=power,
                               interference=interference,
                               per_stream_snr=snrs, mode=mode,
                               snr_targets=snr.diag, xi=xi, warning=warning)
