import numpy as np
import pytest

from grassmann_core import Subspace, orthonormalize


def line(*coords):
    """The line through coords as a point on Gr(1, n)."""
    v = np.asarray(coords, dtype=float)
    return Subspace((v / np.linalg.norm(v)).reshape(-1, 1))


def span(*vectors):
    return orthonormalize(np.column_stack(vectors))


def e(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def random_point(rng, n, k):
    return orthonormalize(rng.uniform(-0.5, 0.5, size=(n, k)))


def random_orthogonal(rng, n):
    return orthonormalize(rng.standard_normal((n, n))).basis


def noisy_cluster(rng, center, count, scale):
    n, k = center.basis.shape
    return [orthonormalize(center.basis + scale * rng.uniform(-0.5, 0.5, size=(n, k)))
            for _ in range(count)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
