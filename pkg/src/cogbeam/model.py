"""
Scenario and channel data types, the derived effective-channel model, and
the Hermitian linear-algebra helpers every solver consumes.

Conventions
-----------
* Eigenvalues are always returned in **descending** order; a consumer that
  needs ascending order reverses locally.
* Eigenvectors are returned as the *columns* of a unitary matrix ``U`` so
  that ``A = U @ diag(w) @ U^H``.
* An eigenvalue is treated as zero when ``w <= size * eps * w_max``.
* Every power of a PSD matrix is a pseudo-inverse power: it acts on the
  nonzero eigenspace only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericalFailure, RankError

__all__ = [
    'ScenarioConfig', 'ChannelSet', 'DerivedModel', 'SnrMatrix',
    'sample_channels', 'build_derived', 'hermitian_evd', 'psd_power',
    'stiefel_residual', 'rank_tolerance', 'random_stiefel', 'hermitize',
]

EPS = np.finfo(float).eps


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Hermitian helpers xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def hermitize(A: np.ndarray) -> np.ndarray:
    """Return ``(A + A^H) / 2``."""
    A = np.asarray(A)
    return 0.5 * (A + A.conj().T)


def rank_tolerance(eigenvalues: np.ndarray, size: Optional[int] = None) -> float:
    """Threshold below which an eigenvalue of a PSD matrix counts as zero."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if eigenvalues.size == 0:
        return 0.0
    if size is None:
        size = eigenvalues.size
    return size * EPS * max(float(np.max(np.abs(eigenvalues))), 0.0)


def hermitian_evd(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a Hermitian matrix with descending eigenvalues.

    The input is symmetrized first, so small round-off asymmetry is
    harmless.

    Parameters
    ----------
    A : np.ndarray
        Square complex (or real) matrix, Hermitian up to round-off.

    Returns
    -------
    w : np.ndarray
        Real eigenvalues, ``w[0] >= w[1] >= ...``.
    U : np.ndarray
        Unitary matrix whose columns are the matching eigenvectors.
    """
    A = hermitize(A)
    try:
        w, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Hermitian eigensolver failed: {exc}") from exc
    return w[::-1].copy(), U[:, ::-1].copy()


def gram_evd(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Descending eigenpairs of ``B^H B`` computed from the SVD of ``B``.

    Squaring singular values keeps the tiny eigenvalues of a rank-deficient
    Gram matrix at ``eps**2`` scale instead of ``eps`` scale.
    """
    B = np.asarray(B)
    k = B.shape[1]
    try:
        _, s, Vh = np.linalg.svd(B, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD failed: {exc}") from exc
    w = np.zeros(k)
    w[:s.size] = s ** 2
    return w, Vh.conj().T


def psd_power(A: np.ndarray, exponent: float) -> np.ndarray:
    """
    Pseudo-inverse power of a Hermitian PSD matrix.

    Only the nonzero eigenspace is raised to ``exponent``; eigenvalues at or
    below the rank tolerance map to exactly zero.

    Parameters
    ----------
    A : np.ndarray
        Hermitian PSD matrix.
    exponent : float
        One of ``-1``, ``0.5`` or ``-0.5``.

    Returns
    -------
    np.ndarray
        Hermitian matrix ``U diag(w**exponent) U^H`` over the nonzero ``w``.
    """
    if exponent not in (-1, 0.5, -0.5):
        raise ValueError("exponent must be one of -1, 0.5, -0.5")
    w, U = hermitian_evd(A)
    keep = w > rank_tolerance(w)
    scaled = np.zeros_like(w)
    scaled[keep] = w[keep] ** exponent
    return hermitize((U * scaled) @ U.conj().T)


def stiefel_residual(V: np.ndarray) -> float:
    """Frobenius distance ``||V^H V - I||``; zero exactly on the Stiefel manifold."""
    V = np.asarray(V)
    d = V.shape[1]
    return float(np.linalg.norm(V.conj().T @ V - np.eye(d)))


def random_stiefel(rng: np.random.Generator, rows: int, cols: int,
                   size: Optional[int] = None) -> np.ndarray:
    """
    Random point(s) on the complex Stiefel manifold via QR of a Gaussian.

    The phases of ``R``'s diagonal are absorbed into ``Q`` so that the
    samples are Haar distributed.
    """
    shape = (rows, cols) if size is None else (size, rows, cols)
    G = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    Q, R = np.linalg.qr(G)
    diag = np.diagonal(R, axis1=-2, axis2=-1)
    phase = diag / np.abs(diag)
    return Q * phase[..., None, :]


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Data types xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class ScenarioConfig:
    """
    Antenna counts, stream count, powers and SNR targets of one scenario.

    All powers and SNRs are linear. ``snr_targets`` is stored sorted in
    non-increasing order; ``snr_order[k]`` is the caller's index of the
    ``k``-th stored target.

    Parameters
    ----------
    m, n, p, q : int
        Antennas at the secondary transmitter, secondary receiver, primary
        transmitter and primary receiver.
    d : int
        Number of secondary data streams.
    primary_power : float
        Primary transmit power.
    xi : float
        Interference cap at the primary receiver.
    snr_targets : sequence of float
        One positive SNR target per stream.
    seed : int
        Seed for channel sampling.
    """
    m: int
    n: int
    p: int
    q: int
    d: int
    primary_power: float = 1.0
    xi: float = 0.0
    snr_targets: tuple = ()
    seed: int = 0
    snr_order: tuple = field(init=False, repr=False)

    def __post_init__(self):
        for name in ('m', 'n', 'p', 'q', 'd'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.d > min(self.m, self.n):
            raise ConfigError(
                f"d={self.d} exceeds min(m, n)={min(self.m, self.n)}")
        if not self.primary_power >= 0:
            raise ConfigError("primary_power must be nonnegative")
        if not self.xi >= 0:
            raise ConfigError("xi must be nonnegative")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        targets = np.asarray(self.snr_targets, dtype=float).ravel()
        if targets.size != self.d:
            raise ConfigError(
                f"expected {self.d} SNR targets, got {targets.size}")
        if not np.all(targets > 0) or not np.all(np.isfinite(targets)):
            raise ConfigError("SNR targets must be positive and finite")
        order = np.argsort(-targets, kind='stable')
        object.__setattr__(self, 'primary_power', float(self.primary_power))
        object.__setattr__(self, 'xi', float(self.xi))
        object.__setattr__(self, 'seed', int(self.seed))
        object.__setattr__(self, 'snr_targets',
                           tuple(float(t) for t in targets[order]))
        object.__setattr__(self, 'snr_order', tuple(int(i) for i in order))

    @property
    def snr(self) -> 'SnrMatrix':
        return SnrMatrix(self.snr_targets)

    def with_(self, **changes) -> 'ScenarioConfig':
        """Copy with some fields replaced (SNR targets are re-sorted)."""
        values = {k: getattr(self, k) for k in
                  ('m', 'n', 'p', 'q', 'd', 'primary_power', 'xi',
                   'snr_targets', 'seed')}
        values.update(changes)
        return ScenarioConfig(**values)


@dataclass(frozen=True)
class SnrMatrix:
    """Diagonal of the per-stream SNR matrix, descending and positive."""
    diag: tuple

    def __post_init__(self):
        values = np.asarray(self.diag, dtype=float).ravel()
        if values.size == 0 or not np.all(values > 0):
            raise ConfigError("SNR targets must be a nonempty positive vector")
        if np.any(np.diff(values) > 0):
            raise ConfigError("SNR targets must be sorted non-increasing")
        object.__setattr__(self, 'diag', tuple(float(v) for v in values))

    @property
    def d(self) -> int:
        return len(self.diag)

    @property
    def values(self) -> np.ndarray:
        return np.array(self.diag)

    @classmethod
    def from_targets(cls, targets) -> 'SnrMatrix':
        """Build from unsorted targets by sorting them descending."""
        return cls(tuple(sorted((float(t) for t in targets), reverse=True)))


@dataclass(frozen=True)
class ChannelSet:
    """
    The three channel matrices of one realization.

    Attributes
    ----------
    H : np.ndarray
        ``n x m`` secondary transmitter to secondary receiver.
    H_x : np.ndarray
        ``q x m`` secondary transmitter to primary receiver.
    G_x : np.ndarray
        ``n x p`` primary transmitter to secondary receiver.
    """
    H: np.ndarray
    H_x: np.ndarray
    G_x: np.ndarray

    def __post_init__(self):
        for name in ('H', 'H_x', 'G_x'):
            A = np.array(getattr(self, name), dtype=complex)
            if A.ndim != 2:
                raise ConfigError(f"{name} must be a 2-D matrix")
            A.setflags(write=False)
            object.__setattr__(self, name, A)
        if self.H.shape[0] != self.G_x.shape[0]:
            raise ConfigError("H and G_x must have the same number of rows (n)")
        if self.H.shape[1] != self.H_x.shape[1]:
            raise ConfigError("H and H_x must have the same number of columns (m)")

    @property
    def dims(self) -> dict:
        n, m = self.H.shape
        return {'m': m, 'n': n, 'p': self.G_x.shape[1], 'q': self.H_x.shape[0]}

    def check_against(self, config: ScenarioConfig) -> None:
        """Raise ConfigError if the shapes disagree with ``config``."""
        expected = {'m': config.m, 'n': config.n, 'p': config.p, 'q': config.q}
        if self.dims != expected:
            raise ConfigError(f"channel dimensions {self.dims} do not match "
                              f"scenario {expected}")

    def is_full_rank(self) -> bool:
        for A in (self.H, self.H_x, self.G_x):
            s = np.linalg.svd(A, compute_uv=False)
            if s.size == 0 or s[-1] <= max(A.shape) * EPS * s[0]:
                return False
        return True


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    # CN(0, 1): real and imaginary parts each N(0, 1/2)
    scale = np.sqrt(0.5)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channels(config: ScenarioConfig, stream_index: int) -> ChannelSet:
    """
    Draw i.i.d. CN(0, 1) channels keyed by ``(config.seed, stream_index)``.

    The draw depends only on the seed and the stream index, never on call
    order, so Monte-Carlo trials may run in any order or in parallel.
    A rank-deficient draw is redrawn once from a derived stream.
    """
    if stream_index < 0:
        raise ConfigError("stream_index must be nonnegative")
    for attempt in range(2):
        rng = np.random.default_rng([config.seed, int(stream_index), attempt])
        channels = ChannelSet(
            H=_complex_gaussian(rng, (config.n, config.m)),
            H_x=_complex_gaussian(rng, (config.q, config.m)),
            G_x=_complex_gaussian(rng, (config.n, config.p)),
        )
        if channels.is_full_rank():
            return channels
    raise NumericalFailure(
        f"rank-deficient channel draw for seed={config.seed}, "
        f"stream={stream_index}")


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Derived model xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True, eq=False)
class DerivedModel:
    """
    Effective-channel quantities derived from one channel realization.

    Attributes
    ----------
    W : np.ndarray
        ``n x n`` interference-plus-noise covariance at the secondary receiver.
    M : np.ndarray
        ``m x m`` whitened channel Gram matrix ``H^H W^-1 H``.
    M_x : np.ndarray
        ``m x m`` primary leakage in whitened coordinates,
        ``M^-1/2 H_x^H H_x M^-1/2``.
    M_evd, Mx_evd : tuple
        ``(eigenvalues descending, eigenvector columns)`` of ``M`` and ``M_x``.
        Eigenvalues below the rank tolerance are stored as exact zeros.
    M_inv_sqrt, M_inv : np.ndarray
        Pseudo-inverse square root and pseudo-inverse of ``M``.
    rank_M : int
        Numerical rank of ``M``.
    range_basis : np.ndarray
        ``m x rank_M`` orthonormal basis of ``range(M)`` (leading eigenvectors).
    mu : np.ndarray
        The ``rank_M`` nonzero eigenvalues of ``M``, descending.
    Mx_reduced : np.ndarray
        ``M_x`` expressed in ``range_basis`` coordinates.
    Bx_reduced : np.ndarray
        ``q x rank_M`` factor with ``Mx_reduced = Bx_reduced^H Bx_reduced``.
    """
    channels: ChannelSet
    primary_power: float
    W: np.ndarray
    M: np.ndarray
    M_x: np.ndarray
    M_evd: tuple
    Mx_evd: tuple
    M_inv_sqrt: np.ndarray
    M_inv: np.ndarray
    rank_M: int
    range_basis: np.ndarray
    mu: np.ndarray
    Mx_reduced: np.ndarray
    Bx_reduced: np.ndarray

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @property
    def H(self) -> np.ndarray:
        return self.channels.H

    @property
    def H_x(self) -> np.ndarray:
        return self.channels.H_x

    @property
    def q(self) -> int:
        return self.channels.H_x.shape[0]

    @property
    def Mx_eigenvalues(self) -> np.ndarray:
        return self.Mx_evd[0]

    def require_streams(self, d: int) -> None:
        """Raise RankError unless ``d`` streams fit in ``range(M)``."""
        if d > self.rank_M:
            raise RankError(f"d={d} streams exceed rank(M)={self.rank_M}")

    def lift(self, Z: np.ndarray) -> np.ndarray:
        """Map reduced coordinates (in ``range_basis``) back to ``C^m``."""
        return self.range_basis @ Z

    def transmit_matrix(self, V: np.ndarray, snr: SnrMatrix) -> np.ndarray:
        """``T = M^-1/2 V Sigma^1/2`` for a Stiefel factor ``V``."""
        return self.M_inv_sqrt @ V * np.sqrt(snr.values)[None, :]


def _clamp_small(w: np.ndarray) -> np.ndarray:
    w = np.array(w, dtype=float)
    w[w <= rank_tolerance(w)] = 0.0
    return w


def build_derived(channels: ChannelSet,
                  config: Optional[ScenarioConfig] = None,
                  primary_power: Optional[float] = None) -> DerivedModel:
    """
    Build ``W``, ``M`` and ``M_x`` with their cached eigendecompositions.

    Parameters
    ----------
    channels : ChannelSet
        One channel realization.
    config : ScenarioConfig, optional
        Supplies the primary power and is checked for dimension agreement.
    primary_power : float, optional
        Overrides ``config.primary_power``; required when ``config`` is None.

    Returns
    -------
    DerivedModel
    """
    if config is not None:
        channels.check_against(config)
        if primary_power is None:
            primary_power = config.primary_power
    if primary_power is None:
        raise ConfigError("primary_power is required when no config is given")
    primary_power = float(primary_power)
    if primary_power < 0:
        raise ConfigError("primary_power must be nonnegative")

    H, H_x, G_x = channels.H, channels.H_x, channels.G_x
    n, m = H.shape
    W = hermitize(primary_power * (G_x @ G_x.conj().T) + np.eye(n))
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"W is not positive definite: {exc}") from exc

    # M = (L^-1 H)^H (L^-1 H)
    whitened = np.linalg.solve(L, H)
    M = hermitize(whitened.conj().T @ whitened)
    mu_all, U_M = gram_evd(whitened)
    mu_all = _clamp_small(mu_all)
    rank_M = int(np.count_nonzero(mu_all))
    if rank_M == 0:
        raise RankError("effective channel M is zero")
    range_basis = U_M[:, :rank_M]
    mu = mu_all[:rank_M]

    M_inv_sqrt = hermitize((range_basis * mu ** -0.5) @ range_basis.conj().T)
    M_inv = hermitize((range_basis / mu) @ range_basis.conj().T)

    # reduced leakage B = H_x U_r diag(mu^-1/2); M_x restricted = B^H B
    B_reduced = (H_x @ range_basis) * mu[None, :] ** -0.5
    Mx_reduced = hermitize(B_reduced.conj().T @ B_reduced)
    B_full = H_x @ M_inv_sqrt
    M_x = hermitize(B_full.conj().T @ B_full)
    x_all, U_x = gram_evd(B_full)
    x_all = _clamp_small(x_all)

    arrays = [W, M, M_x, M_inv_sqrt, M_inv, range_basis, mu, Mx_reduced,
              B_reduced, mu_all, U_M, x_all, U_x]
    for A in arrays:
        A.setflags(write=False)

    return DerivedModel(
        channels=channels,
        primary_power=primary_power,
        W=W, M=M, M_x=M_x,
        M_evd=(mu_all, U_M),
        Mx_evd=(x_all, U_x),
        M_inv_sqrt=M_inv_sqrt,
        M_inv=M_inv,
        rank_M=rank_M,
        range_basis=range_basis,
        mu=mu,
        Mx_reduced=Mx_reduced,
        Bx_reduced=B_reduced,
    )
