import numpy as np
import pytest
from hypothesis import settings, HealthCheck

import blochhom as bh

settings.register_profile(
    "lab", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def iso_field():
    return bh.constant_field(bh.make_isotropic(1.0, 1.0), 4)


@pytest.fixture(scope="session")
def laminate_field():
    return bh.make_laminate(bh.make_isotropic(1.0, 1.0),
                            bh.make_isotropic(2.0, 2.0), 0.5, 1, 16)


@pytest.fixture(scope="session")
def smooth_field_k2():
    # resolution matched to the pad=2 quadrature grid of K=2, so the
    # sampled medium is the band-limited cosine blend exactly
    return bh.make_smooth_laminate(bh.make_isotropic(1.0, 1.0),
                                   bh.make_isotropic(2.0, 2.0), 1, 10, depth=0.6)


def smooth_field_for_k(k_cut, pad=2):
    n = pad * (2 * k_cut + 1)
    return bh.make_smooth_laminate(bh.make_isotropic(1.0, 1.0),
                                   bh.make_isotropic(2.0, 2.0), 1, n, depth=0.6)
