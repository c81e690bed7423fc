import numpy as np
import pytest

from cogbeam.certificates import (oracle_min_power, random_feasible_power, receive_snr,
                                  sdp_dual_single_stream)
from cogbeam.errors import InfeasibleError, OracleNoFeasiblePoint
from cogbeam.feasibility import xi_min
from cogbeam.model import SnrMatrix, hermitian_evd
from cogbeam.nfb import lower_bound_power, power_and_interference_at, solve_nfb
from cogbeam.zfb import solve_zfb

from conftest import random_instance


def binding_xi(D, snr):
    """Cap halfway (geometrically) between the floor and the free interference."""
    x0 = xi_min(D, snr).xi_min
    _, free = power_and_interference_at(D, snr, 0.0)
    return float(np.sqrt(max(x0, 1e-3 * free) * free))


# xxxxxxxxxx receive SNR xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def test_single_stream_closed_form(rng):
    _, D = random_instance(1, d=1, rho=(1.0,))
    t = rng.standard_normal((5, 1)) + 1j * rng.standard_normal((5, 1))
    expected = np.real(t.conj().T @ D.M @ t).item()
    assert receive_snr(t, D.H, D.W)[0] == pytest.approx(expected, rel=1e-12)


def test_solver_outputs_meet_targets_at_receiver():
    for seed in range(20):
        config, D = random_instance(seed, d=3, rho=(9.0, 4.0, 1.0))
        for sol in (solve_zfb(D, config.snr), solve_nfb(D, config.snr, 0.2)):
            rx = receive_snr(sol.T, D.H, D.W)
            assert np.allclose(rx, config.snr.values, rtol=1e-8)
            assert np.allclose(rx, sol.per_stream_snr, rtol=1e-8)


def test_diagonalized_beamformer_matches_effective_channel(rng):
    # equivalence holds once T^H M T is diagonal; rotate T into that basis
    for seed in range(20):
        _, D = random_instance(seed, d=3)
        T = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        _, U = hermitian_evd(T.conj().T @ D.M @ T)
        Td = T @ U
        eig = hermitian_evd(Td.conj().T @ D.M @ Td)[0]
        assert np.allclose(receive_snr(Td, D.H, D.W), eig, rtol=1e-8)


def test_repeated_column_collapses_second_stream():
    config, D = random_instance(3, d=2, rho=(4.0, 4.0))
    T = np.array(solve_zfb(D, config.snr).T)
    T[:, 1] = T[:, 0]
    rx = receive_snr(T, D.H, D.W)
    assert rx.min() < 0.5 * 4.0


# xxxxxxxxxx single-stream dual xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def test_dual_identity(identity_model):
    rep = sdp_dual_single_stream(identity_model, 2.0, 2.0)
    assert rep.dual_value == pytest.approx(2.0, abs=1e-9)
    assert rep.primal_value == pytest.approx(2.0, abs=1e-9)


def test_dual_infeasible(identity_model):
    with pytest.raises(InfeasibleError):
        sdp_dual_single_stream(identity_model, 2.0, 1.0)


def test_dual_binding_and_loose():
    for seed in range(15):
        config, D = random_instance(seed, m=3, n=3, q=2, d=1, rho=(5.0,))
        xi = binding_xi(D, config.snr)
        rep = sdp_dual_single_stream(D, 5.0, xi)
        assert abs(rep.gap) / rep.primal_value < 1e-4
        assert rep.mu1 > 0 and rep.psd_min_eigenvalue >= -1e-8
        assert max(abs(r) for r in rep.complementary_residuals) < 1e-6 * rep.scale
        loose = sdp_dual_single_stream(D, 5.0, 1e6)
        assert loose.mu1 == 0.0
        assert abs(loose.complementary_residuals[1]) < 1e-12


# xxxxxxxxxx brute-force oracle xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def test_oracle_identity(identity_model):
    p, V = oracle_min_power(identity_model, SnrMatrix((2.0,)), 5.0, budget=200)
    assert p == pytest.approx(2.0, abs=1e-6)
    assert V.shape == (3, 1)


def test_oracle_unconstrained_matches_lower_bound():
    config, D = random_instance(4, m=3, n=3, q=2, d=2, rho=(3.0, 1.0))
    p, _ = oracle_min_power(D, config.snr, 1e9, budget=500)
    assert p == pytest.approx(lower_bound_power(D, config.snr), abs=1e-5)


def test_oracle_dominates_solver():
    for seed in range(8):
        config, D = random_instance(seed, m=3, n=3, q=2, d=1, rho=(4.0,))
        xi = binding_xi(D, config.snr)
        p, _ = oracle_min_power(D, config.snr, xi, budget=500)
        nfb = solve_nfb(D, config.snr, xi).power
        assert p >= nfb - 1e-6
        assert p == pytest.approx(nfb, rel=1e-4)


def test_oracle_reports_empty_feasible_set(identity_model):
    with pytest.raises(OracleNoFeasiblePoint):
        oracle_min_power(identity_model, SnrMatrix((2.0,)), 1.0, budget=50, refine=1)


def test_random_feasible_baseline_costs_more():
    for seed in range(10):
        config, D = random_instance(seed, d=1, rho=(10.0,))
        for xi in (0.0, 1.0):
            base = random_feasible_power(D, config.snr, xi, samples=100, seed=seed)
            opt = solve_nfb(D, config.snr, xi).power
            assert base is not None and base >= opt
