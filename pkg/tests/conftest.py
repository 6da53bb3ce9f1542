import numpy as np
import pytest

from liesde.lie import son_generators

G1, G2, G3 = son_generators(3)
J = son_generators(2)[0]


def rand_skew(rng, n=3, scale=1.0):
    A = rng.standard_normal((n, n))
    return scale * (A - A.T) / 2


def skew_with_norm(rng, norm, n=3):
    S = rand_skew(rng, n)
    return norm * S / np.linalg.norm(S)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
