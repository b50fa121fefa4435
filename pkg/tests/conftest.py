import numpy as np
import pytest
import torch

from maneuver_net.synth import SynthConfig, generate_synthetic


@pytest.fixture(autouse=True)
def _single_thread():
    # bitwise reproducibility of torch reductions needs a fixed thread count
    prev = torch.get_num_threads()
    torch.set_num_threads(1)
    yield
    torch.set_num_threads(prev)


@pytest.fixture(scope="session")
def small_config():
    return SynthConfig(n_nlc=2, n_llc=1, n_rlc=1, name="small")


@pytest.fixture(scope="session")
def small_recording(small_config):
    return generate_synthetic(small_config, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def textured(shape, seed=0, sigma=2.0):
    """Smooth random texture in [0, 255], used by flow tests."""
    from maneuver_net.imgops import gaussian_blur

    r = np.random.default_rng(seed)
    img = gaussian_blur(r.uniform(0, 255, shape), 9, sigma)
    img -= img.min()
    return img * (255.0 / img.max())
