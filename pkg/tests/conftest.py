"""
Shared fixtures and the --runslow switch for desk-scale training runs.
"""

import logging

import numpy as np
import pytest

from src.data.synth import generate
from src.utils.config import AttentionConfig, DatasetSpec, FbcConfig, RunConfig
from src.utils.logging_utils import EPOCH_LOGGER


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale training tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale run, skipped unless --runslow is given")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def small_run_config(**overrides) -> RunConfig:
    """Narrow network and short training for fast tests."""
    config = RunConfig(
        data=DatasetSpec(n_videos=20, n_classes=3, n_regions=2, visual_dim=8, audio_dim=6, noise_sigma=0.3),
        attention=AttentionConfig(d_model=16, n_heads=2, d_k=8, d_v=8, ff_hidden=32, n_mcm=1, agva_hidden=16),
        fbc=FbcConfig(rank=2, n_atoms=16),
    )
    config.train.epochs = 3
    config.train.batch_size = 8
    for key, value in overrides.items():
        config.set(key, value)
    config.validate()
    return config


@pytest.fixture
def small_config():
    return small_run_config()


@pytest.fixture
def small_dataset(small_config):
    return generate(small_config.data)


@pytest.fixture
def rng_array():
    state = np.random.default_rng(1234)
    return lambda *shape: state.standard_normal(shape).astype(np.float32)


@pytest.fixture(autouse=True)
def reset_log_handlers():
    """Drop handlers the commands attach, so no test logs into another test's captured stream."""
    yield
    for name in (None, EPOCH_LOGGER):
        logger = logging.getLogger(name)
        for handler in list(logger.handlers):
            if type(handler) in (logging.StreamHandler, logging.FileHandler):
                logger.removeHandler(handler)
                handler.close()
