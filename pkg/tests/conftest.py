import numpy as np
import pytest

from finpersona.synthgen import GeneratorConfig, generate


@pytest.fixture(scope="session")
def small_data():
    cfg = GeneratorConfig(n_customers=300, seed=11)
    static, months = generate(cfg)
    return cfg, static, months


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
