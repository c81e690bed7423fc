"""
Randomized property checks runnable from an installed package.

Each check prints one ``PASS``/``FAIL`` line with its worst observed value.
"""

from __future__ import annotations

import numpy as np

from .certificates import receive_snr
from .feasibility import min_trace_pairing, xi_min
from .model import (ScenarioConfig, build_derived, hermitian_evd,
                    random_stiefel, sample_channels)
from .nfb import lower_bound_power, power_and_interference_at, solve_nfb
from .zfb import solve_zfb

__all__ = ['run_selftest']


def _instances(trials, seed):
    rng = np.random.default_rng(seed)
    for k in range(trials):
        d = int(rng.integers(1, 4))
        rho = tuple(np.sort(rng.uniform(1.0, 20.0, d))[::-1])
        config = ScenarioConfig(m=5, n=5, p=2, q=2, d=d, snr_targets=rho, seed=seed)
        derived = build_derived(sample_channels(config, k), config)
        yield config, derived


def _trace_pairing_worst(rng, trials):
    worst_gap, worst_eq = np.inf, 0.0
    for _ in range(trials):
        v = int(rng.integers(2, 7))
        u = int(rng.integers(1, v + 1))
        delta = np.sort(rng.uniform(0, 5, u))[::-1]
        B = rng.standard_normal((v, v)) + 1j * rng.standard_normal((v, v))
        omega, U = hermitian_evd(B @ B.conj().T)
        bound = min_trace_pairing(delta, omega)
        Theta = random_stiefel(rng, v, u)
        Omega = (U * omega) @ U.conj().T
        value = np.real(np.trace(np.diag(delta) @ Theta.conj().T @ Omega @ Theta))
        worst_gap = min(worst_gap, value - bound)
        trailing = U[:, ::-1][:, :u]
        at_eq = np.real(np.trace(np.diag(delta) @ trailing.conj().T @ Omega @ trailing))
        worst_eq = max(worst_eq, abs(at_eq - bound))
    return worst_gap, worst_eq


def run_selftest(trials: int = 50, seed: int = 0, out=print) -> bool:
    """
    Run the property checks on ``trials`` random instances.

    Returns
    -------
    bool
        True when every check passes.
    """
    worst = dict(zf=0.0, snr=0.0, rx=0.0, slack=0.0, order=-np.inf, mono=-np.inf)
    xi_values = (0.01, 0.3, 3.0)
    ygrid = np.linspace(0.0, 10.0, 21)
    for config, derived in _instances(trials, seed):
        snr = config.snr
        rho = np.asarray(snr.values)
        zfb = solve_zfb(derived, snr)
        scale = np.linalg.norm(derived.H_x) * np.linalg.norm(zfb.T)
        worst['zf'] = max(worst['zf'], np.linalg.norm(derived.H_x @ zfb.T) / scale)
        lb = lower_bound_power(derived, snr)
        x0 = xi_min(derived, snr).xi_min
        for xi in xi_values:
            sol = solve_nfb(derived, snr, max(xi, x0))
            for s in (zfb, sol):
                worst['snr'] = max(worst['snr'], np.max(np.abs(s.per_stream_snr - rho) / rho))
                rx = receive_snr(s.T, derived.H, derived.W)
                worst['rx'] = max(worst['rx'], np.max(np.abs(rx - rho) / rho))
            if sol.y and sol.y > 0:
                worst['slack'] = max(worst['slack'], abs(sol.interference - sol.xi) / sol.xi)
            worst['order'] = max(worst['order'], (lb - sol.power) / lb,
                                 (sol.power - zfb.power) / zfb.power)
        prev_p, prev_i = -np.inf, np.inf
        for y in ygrid:
            p, i = power_and_interference_at(derived, snr, y)
            worst['mono'] = max(worst['mono'], prev_p - p, i - prev_i)
            prev_p, prev_i = p, i
    gap, eq = _trace_pairing_worst(np.random.default_rng(seed), 10 * trials)
    checks = [
        ('zero forcing ||HxT|| / (||Hx|| ||T||)', worst['zf'], 1e-10),
        ('eig(T^H M T) vs targets, relative', worst['snr'], 1e-8),
        ('receive SINR vs targets, relative', worst['rx'], 1e-8),
        ('binding slackness |I - xi| / xi', worst['slack'], 1e-6),
        ('ordering lower bound <= NFB <= ZFB', worst['order'], 1e-9),
        ('monotone power and interference in y', worst['mono'], 1e-9),
        ('trace pairing bound violation', -gap, 1e-9),
        ('trace pairing equality residual', eq, 1e-9),
    ]
    ok = True
    for name, value, tol in checks:
        good = bool(value <= tol)
        ok &= good
        out(f"{'PASS' if good else 'FAIL'}  {name}: {value:.3g} (tol {tol:g})")
    return ok
