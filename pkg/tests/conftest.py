import numpy as np
import pytest

from multisparse import Dataset, Hyperparameters


def central_diff(f, x, step=1e-6, order=2):
    """Central differences; ``order=4`` uses the five-point stencil."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = step
        if order == 4:
            g.flat[i] = (f(x - 2 * e) - 8 * f(x - e) + 8 * f(x + e) - f(x + 2 * e)) / (12 * step)
        else:
            g.flat[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


def sine_data(n, d=1, noise=0.1, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-3, 3, size=(n, d))
    y = np.sin(X.sum(axis=1)) + noise * rng.standard_normal(n)
    return Dataset(X, y)


def random_hyper(rng, d, noise=None):
    return Hyperparameters(rng.uniform(0.5, 2.0),
                           noise if noise is not None else rng.uniform(0.01, 0.2),
                           rng.uniform(0.5, 2.0, size=d))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
