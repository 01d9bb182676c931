"""Pure NumPy implementations of the primitive kernels.

Same call surface as the compiled extension `_kernels`; the backend
module picks one of the two at import time. All arrays are float64 and
C-contiguous; shape validation happens one level up in `ops`.
"""

import numpy as np


def affine(x, w, b):
    return x @ w + b


def affine_backward(g, x, w):
    return g @ w.T, x.T @ g, g.sum(axis=0)


def relu(z):
    return np.maximum(z, 0.0)


def relu_backward(g, z):
    return np.where(z > 0.0, g, 0.0)


def tanh(z):
    return np.tanh(z)


def tanh_backward(g, y):
    return g * (1.0 - y * y)


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_backward(g, y):
    return g * y * (1.0 - y)


def softmax_rows(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_backward(g, y):
    dot = (g * y).sum(axis=1, keepdims=True)
    return y * (g - dot)


def neighbor_mean(features, adj):
    """Row i of the result is the mean of features over in-neighbors of i.

    adj[j, i] nonzero means edge j -> i. Nodes without in-neighbors get a
    zero row.
    """
    indeg = adj.sum(axis=0)
    agg = adj.T @ features
    return agg / np.maximum(indeg, 1.0)[:, None]


def neighbor_mean_backward(g, adj):
    indeg = adj.sum(axis=0)
    scaled = g / np.maximum(indeg, 1.0)[:, None]
    return adj @ scaled


def adam_update(p, g, m, v, lr, beta1, beta2, eps, t):
    """In-place Adam update on flat float64 views."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)
