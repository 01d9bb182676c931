import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def numeric_gradient(f, x0, eps=1e-5):
    """Independent central-difference gradient of scalar f at x0."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    for k in range(x0.size):
        up = x0.copy()
        up[k] += eps
        down = x0.copy()
        down[k] -= eps
        grad[k] = (f(up) - f(down)) / (2.0 * eps)
    return grad


def max_rel_err(analytic, numeric):
    analytic = np.asarray(analytic).ravel()
    numeric = np.asarray(numeric).ravel()
    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
