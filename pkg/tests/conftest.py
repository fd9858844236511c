import random

import pytest

from sse_vault.crypto import ChameleonParams, ChameleonTrapdoor, ch_setup


@pytest.fixture(scope="session")
def chameleon():
    """Full-size 1024/160-bit group, generated once per session."""
    return ch_setup(1024, 160, random.Random(20240611))


@pytest.fixture(scope="session")
def small_chameleon():
    return ch_setup(256, 64, random.Random(5))


@pytest.fixture(scope="session")
def tiny():
    return ChameleonParams(p=23, q=11, g=2, y=8), ChameleonTrapdoor(3)
