import numpy as np
import pytest

from cogbeam.model import ChannelSet, ScenarioConfig, build_derived, sample_channels


def make_derived(H, H_x, G_x=None, primary_power=0.0):
    """Derived model from explicit channels (no primary by default)."""
    H = np.asarray(H, dtype=complex)
    if G_x is None:
        G_x = np.zeros((H.shape[0], 1))
    return build_derived(ChannelSet(H, np.asarray(H_x, dtype=complex), G_x),
                         primary_power=primary_power)


def random_instance(seed, stream=0, m=5, n=5, p=2, q=2, d=2, rho=None):
    rho = (10.0,) * d if rho is None else tuple(rho)
    config = ScenarioConfig(m=m, n=n, p=p, q=q, d=d, snr_targets=rho, seed=seed)
    return config, build_derived(sample_channels(config, stream), config)


@pytest.fixture
def identity_model():
    """``M = M_x = I_3``."""
    return make_derived(np.eye(3), np.eye(3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
