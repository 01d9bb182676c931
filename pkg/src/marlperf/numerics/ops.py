"""Forward/backward numeric operations built on the kernel backend.

Every forward returns a cache consumed by the matching backward; the
backward recovers input gradients and per-layer parameter gradients via
the chain rule. All math is float64.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import CacheError, DimensionError
from .backend import impl
from .store import GradStore, ParamStore

ACTIVATIONS = ("relu", "tanh", "softmax", "sigmoid", "identity")


def as_tensor2(x):
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d tensor, got shape {a.shape}")
    return a


def _activate(z, activation):
    if activation == "identity":
        return z
    if activation == "relu":
        return impl.relu(z)
    if activation == "tanh":
        return impl.tanh(z)
    if activation == "sigmoid":
        return impl.sigmoid(z)
    if activation == "softmax":
        return impl.softmax_rows(z)
    raise ValueError(f"unknown activation {activation!r}")


def _activate_backward(g, cache):
    if cache.activation == "identity":
        return g
    if cache.activation == "relu":
        return impl.relu_backward(g, cache.pre)
    if cache.activation == "tanh":
        return impl.tanh_backward(g, cache.out)
    if cache.activation == "sigmoid":
        return impl.sigmoid_backward(g, cache.out)
    if cache.activation == "softmax":
        return impl.softmax_rows_backward(g, cache.out)
    raise ValueError(f"unknown activation {cache.activation!r}")


@dataclass
class DenseCache:
    x: np.ndarray
    layer: object
    pre: np.ndarray
    out: np.ndarray
    activation: str


def dense_forward(x, layer, activation="identity"):
    """activation(x @ W + b) with the pre-activation cached for backward."""
    x = as_tensor2(x)
    if x.shape[1] != layer.fan_in:
        raise DimensionError(
            f"input width {x.shape} does not match layer "
            f"({layer.fan_in}, {layer.fan_out})"
        )
    pre = impl.affine(x, layer.weights, layer.bias)
    out = _activate(pre, activation)
    return out, DenseCache(x, layer, pre, out, activation)


def dense_backward(grad_out, cache):
    """Returns (grad_input, (grad_weights, grad_bias))."""
    grad_out = as_tensor2(grad_out)
    if not isinstance(cache, DenseCache):
        raise CacheError("dense_backward needs the cache from dense_forward")
    if grad_out.shape != cache.out.shape:
        raise CacheError(
            f"grad shape {grad_out.shape} does not match cached output "
            f"{cache.out.shape}"
        )
    gpre = _activate_backward(grad_out, cache)
    gx, gw, gb = impl.affine_backward(gpre, cache.x, cache.layer.weights)
    return gx, (gw, gb)


@dataclass
class GruCache:
    x: np.ndarray
    h_prev: np.ndarray
    xr: np.ndarray  # [x || h_prev]
    xc: np.ndarray  # [x || r*h_prev]
    r: np.ndarray
    z: np.ndarray
    c: np.ndarray
    params: ParamStore


def gru_cell_forward(x, h_prev, params):
    """One GRU step. params holds three gru-gate layers: reset, update,
    candidate, each acting on the concatenation of input and state.

        r  = sigmoid([x||h] Wr + br)
        z  = sigmoid([x||h] Wz + bz)
        c  = tanh([x||r*h] Wc + bc)
        h' = z*h + (1-z)*c
    """
    x = as_tensor2(x)
    h_prev = as_tensor2(h_prev)
    if x.shape[0] != h_prev.shape[0]:
        raise DimensionError(
            f"x rows {x.shape[0]} != h_prev rows {h_prev.shape[0]}"
        )
    lr_, lz, lc = params.layers
    if x.shape[1] + h_prev.shape[1] != lr_.fan_in:
        raise DimensionError(
            f"gru widths {x.shape[1]}+{h_prev.shape[1]} do not match gate "
            f"fan-in {lr_.fan_in}"
        )
    xr = np.ascontiguousarray(np.hstack([x, h_prev]))
    r = impl.sigmoid(impl.affine(xr, lr_.weights, lr_.bias))
    z = impl.sigmoid(impl.affine(xr, lz.weights, lz.bias))
    xc = np.ascontiguousarray(np.hstack([x, r * h_prev]))
    c = impl.tanh(impl.affine(xc, lc.weights, lc.bias))
    h_next = z * h_prev + (1.0 - z) * c
    return h_next, GruCache(x, h_prev, xr, xc, r, z, c, params)


def gru_cell_backward(grad_h, cache):
    """Returns (grad_x, grad_h_prev, GradStore congruent with params)."""
    if not isinstance(cache, GruCache):
        raise CacheError("gru_cell_backward needs the cache from gru_cell_forward")
    grad_h = as_tensor2(grad_h)
    if grad_h.shape != cache.h_prev.shape:
        raise CacheError(
            f"grad shape {grad_h.shape} does not match state {cache.h_prev.shape}"
        )
    xw = cache.x.shape[1]
    r, z, c, h = cache.r, cache.z, cache.c, cache.h_prev
    lr_, lz, lc = cache.params.layers
    grads = GradStore.zeros_like(cache.params)

    gz = grad_h * (h - c)
    gc = grad_h * (1.0 - z)
    gh = grad_h * z

    gpc = impl.tanh_backward(gc, c)
    gxc, gwc, gbc = impl.affine_backward(gpc, cache.xc, lc.weights)
    gx = gxc[:, :xw].copy()
    grh = gxc[:, xw:]
    gr = grh * h
    gh = gh + grh * r

    gpz = impl.sigmoid_backward(gz, z)
    gxr, gwz, gbz = impl.affine_backward(gpz, cache.xr, lz.weights)
    gpr = impl.sigmoid_backward(gr, r)
    gxr2, gwr, gbr = impl.affine_backward(gpr, cache.xr, lr_.weights)
    gxr = gxr + gxr2

    gx += gxr[:, :xw]
    gh = gh + gxr[:, xw:]

    grads.add_layer(0, gwr, gbr)
    grads.add_layer(1, gwz, gbz)
    grads.add_layer(2, gwc, gbc)
    return gx, gh, grads


@dataclass
class GraphAggregateCache:
    agg: np.ndarray
    adj: np.ndarray
    dense: DenseCache


def graph_aggregate(node_features, graph, params, activation="identity"):
    """Per node: activation(W . mean of in-neighbor features + b).

    Nodes with no in-neighbors aggregate a zero vector. Returns
    (output, cache).
    """
    feats = as_tensor2(node_features)
    adj = graph.edges_float()
    if adj.shape != (feats.shape[0], feats.shape[0]):
        raise DimensionError(
            f"adjacency {adj.shape} does not match {feats.shape[0]} node rows"
        )
    agg = impl.neighbor_mean(feats, adj)
    out, dcache = dense_forward(agg, params.layers[0], activation)
    return out, GraphAggregateCache(agg, adj, dcache)


def graph_aggregate_backward(grad_out, cache):
    """Returns (grad_node_features, (grad_weights, grad_bias))."""
    if not isinstance(cache, GraphAggregateCache):
        raise CacheError("graph_aggregate_backward needs a graph_aggregate cache")
    gagg, gwb = dense_backward(grad_out, cache.dense)
    gfeat = impl.neighbor_mean_backward(np.ascontiguousarray(gagg), cache.adj)
    return gfeat, gwb


def adam_step(params, grads, state):
    """Bias-corrected Adam update, in place on params. Increments the
    step count once per call."""
    state.check_congruent(params)
    from .store import check_finite_grads

    check_finite_grads(grads)
    state.step_count += 1
    t = state.step_count
    for i, (pl, gl) in enumerate(zip(params.layers, grads.layers)):
        mw, mb = state.m[i]
        vw, vb = state.v[i]
        impl.adam_update(
            pl.weights.ravel(), gl.weights.ravel(), mw, vw,
            state.lr, state.beta1, state.beta2, state.eps, t,
        )
        impl.adam_update(
            pl.bias, gl.bias, mb, vb,
            state.lr, state.beta1, state.beta2, state.eps, t,
        )
    return params


def gradcheck(loss_and_grad, params, eps=1e-5):
    """Max relative error between analytic gradient and central finite
    differences over every parameter.

    loss_and_grad(params) must return (loss: float, flat_grad: vector in
    ParamStore.flat() order) and be deterministic. The relative error per
    parameter is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    _, analytic = loss_and_grad(params)
    base = params.flat()
    worst = 0.0
    for k in range(base.size):
        vec = base.copy()
        vec[k] = base[k] + eps
        params.set_flat(vec)
        up, _ = loss_and_grad(params)
        vec[k] = base[k] - eps
        params.set_flat(vec)
        down, _ = loss_and_grad(params)
        numeric = (up - down) / (2.0 * eps)
        err = abs(analytic[k] - numeric) / max(1e-8, abs(analytic[k]) + abs(numeric))
        worst = max(worst, err)
    params.set_flat(base)
    return worst
