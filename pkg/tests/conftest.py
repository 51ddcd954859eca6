import pytest

from renormlab.holopair import build_holo_pair
from renormlab.rotation import ContinuedFraction, tuned_map

GOLDEN_CF = ContinuedFraction.constant(1, 20)
SILVER_CF = ContinuedFraction.constant(2, 14)


@pytest.fixture(scope="session")
def golden_cf():
    return GOLDEN_CF


@pytest.fixture(scope="session")
def silver_cf():
    return SILVER_CF


@pytest.fixture(scope="session")
def arnold_golden():
    return tuned_map("Arnold", GOLDEN_CF)


@pytest.fixture(scope="session")
def perturbed_golden():
    return tuned_map("PerturbedArnold", GOLDEN_CF, b=0.03)


@pytest.fixture(scope="session")
def arnold_silver():
    return tuned_map("Arnold", SILVER_CF)


@pytest.fixture(scope="session")
def holo8(arnold_golden):
    return build_holo_pair(arnold_golden, GOLDEN_CF, 8)
