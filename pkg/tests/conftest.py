import numpy as np
import pytest

from bogatse.fields import default_field_spec, generate_mode_fields
from bogatse.phantom import default_phantom_spec, generate_phantom
from bogatse.pipeline import default_config
from bogatse.sequence import AcquisitionConfig, PRESETS, simulate_acquisition_set
from bogatse.volume import ComplexVolume, Grid, RealVolume


@pytest.fixture(scope="session")
def phantom64():
    return generate_phantom(default_phantom_spec())


@pytest.fixture(scope="session")
def fields64():
    return generate_mode_fields(default_field_spec())


@pytest.fixture(scope="session")
def acq_exact(phantom64, fields64):
    """Noiseless model-exact acquisition sets for both presets."""
    cfg = AcquisitionConfig(fidelity="model-exact", sigma=0.0)
    return {
        name: simulate_acquisition_set(phantom64, fields64, PRESETS[name], cfg)
        for name in ("tse50", "tse100")
    }


@pytest.fixture()
def small_doc():
    """A fast, fully valid experiment document on a 24^3 grid."""
    return default_config(Grid(24, 24, 24, 3.0, 3.0, 3.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_complex_volume(grid: Grid, rng) -> ComplexVolume:
    return ComplexVolume(
        grid,
        rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape),
    )


def random_real_volume(grid: Grid, rng, valid=None) -> RealVolume:
    return RealVolume(grid, rng.standard_normal(grid.shape), valid)
