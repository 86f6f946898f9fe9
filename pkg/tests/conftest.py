import numpy as np
import pytest

from dfrcbeam.architecture import ArchitectureSpec, random_feasible
from dfrcbeam.channel import ClusterModel, SystemDims, gen_channel, make_grid
from dfrcbeam.metrics import HybridPrecoder, RadarScene


def small_dims(**kw):
    base = dict(n_tx_antennas=8, n_rx_antennas=2, n_tx_rf=2, n_rx_rf=2,
                n_streams=2, n_users=2, n_subcarriers=2, n_radar_rx_rf=4)
    base.update(kw)
    return SystemDims(**base)


def small_scene(n_grid=121, angles=(-0.4,), gains=(1.0,),
                mainlobe=((-0.5, -0.3),)):
    return RadarScene(target_angles=np.array(angles),
                      target_gains=np.array(gains, dtype=complex),
                      mainlobe=list(mainlobe), grid=make_grid(n_grid))


def random_precoder(spec: ArchitectureSpec, n_subcarriers, n_streams, power,
                    seed) -> HybridPrecoder:
    rng = np.random.default_rng(seed)
    analog = random_feasible(spec, seed)
    digital = (rng.standard_normal((n_subcarriers, spec.n_tx_rf, n_streams))
               + 1j * rng.standard_normal((n_subcarriers, spec.n_tx_rf, n_streams)))
    return HybridPrecoder.from_parts(analog, digital, power)


@pytest.fixture
def channel_small():
    dims = small_dims()
    return dims, gen_channel(dims, ClusterModel(3, 4), seed=11,
                             noise_variance=0.25)
