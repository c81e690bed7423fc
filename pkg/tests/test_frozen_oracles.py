"""
Solver output against reference values from independent brute-force search.

The constants come from ``tools/freeze_oracles.py`` and were frozen before
being compared with the closed-form and dual solvers.
"""

import pytest

from cogbeam.feasibility import xi_min
from cogbeam.nfb import solve_nfb
from cogbeam.zfb import solve_zfb

from conftest import random_instance

# m=4, q=3, rho=(2, 1), seed 31: 10^6 Haar samples plus a local polish
XI0_SEARCH = 0.9392611916459093
XI0_RAW_SAMPLES = 1.988125791996814
# m=4, q=1, rho=(3, 1.5), seed 21: Stiefel search inside null(H_x)
ZFB_RESTRICTED = 0.9486654460382706
# m=3, q=2, rho=(4, 2), seed 11, binding cap
NFB_XI = 3.1864817514558963
NFB_ORACLE = 10.00897877017862


def test_floor_against_stiefel_search():
    config, D = random_instance(31, m=4, n=4, q=3, d=2, rho=(2.0, 1.0))
    x0 = xi_min(D, config.snr).xi_min
    assert XI0_SEARCH >= x0 - 1e-9 and XI0_RAW_SAMPLES >= x0 - 1e-9
    assert x0 == pytest.approx(XI0_SEARCH, rel=1e-3)


def test_zfb_against_restricted_search():
    config, D = random_instance(21, m=4, n=4, q=1, d=2, rho=(3.0, 1.5))
    assert solve_zfb(D, config.snr).power == pytest.approx(ZFB_RESTRICTED, rel=1e-5)


def test_nfb_against_oracle():
    config, D = random_instance(11, m=3, n=3, q=2, d=2, rho=(4.0, 2.0))
    power = solve_nfb(D, config.snr, NFB_XI).power
    assert NFB_ORACLE >= power - 1e-6
    assert power == pytest.approx(NFB_ORACLE, rel=1e-4)
