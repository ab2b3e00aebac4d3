import numpy as np
import pytest

from occufluct.rng import stream


@pytest.fixture
def rng():
    return stream(20240817)


def seeded(*ids):
    return stream(918273645, *ids)
