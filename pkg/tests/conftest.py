import numpy as np
import pytest

from cfmimo.config import (Beamforming, CircuitModel, CsiModel, Mode,
                           Objective, SystemConfig)


def small_config(**overrides) -> SystemConfig:
    """Tiny fast instance used by most unit tests."""
    base = dict(area_m=100.0, n_aps=2, n_ms=2, n_ap_ant=4, n_ms_ant=2,
                p_streams=1, mode=Mode.CF, beamforming=Beamforming.FD,
                csi=CsiModel.PERFECT, circuit_model=CircuitModel.STATIC,
                p_c_w=1.0, p_max_w=0.1, drops=2, seed=0,
                cluster_density_per_m2=0.01, objective=Objective.GEE)
    base.update(overrides)
    return SystemConfig(**base)


def random_tensor(rng: np.random.Generator, n_aps=3, n_users=2, p=1,
                  noise_var=1e-3, bandwidth=1.0, served=None, scale=1.0):
    """Random dense GainTensor for algebra-level tests."""
    from cfmimo.rates import GainTensor
    if served is None:
        served = np.ones((n_aps, n_users), dtype=bool)
    gains = scale * (rng.standard_normal((n_users, n_users, n_aps, p, p))
                     + 1j * rng.standard_normal((n_users, n_users, n_aps, p, p)))
    gains *= served.T[None, :, :, None, None]
    return GainTensor(gains=gains, served=served, bandwidth_hz=bandwidth,
                      noise_var=noise_var, n_ms_ant=2 * p, p_streams=p)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
