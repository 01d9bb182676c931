from .backend import BACKEND_NAME, HAVE_COMPILED, get_backend, impl
from .ops import (
    ACTIVATIONS,
    DenseCache,
    GraphAggregateCache,
    GruCache,
    adam_step,
    as_tensor2,
    dense_backward,
    dense_forward,
    gradcheck,
    graph_aggregate,
    graph_aggregate_backward,
    gru_cell_backward,
    gru_cell_forward,
)
from .store import (
    GradStore,
    Layer,
    OptimizerState,
    ParamStore,
    check_finite_grads,
    init_dense_layer,
    init_gru,
    init_mlp,
)

__all__ = [
    "ACTIVATIONS",
    "BACKEND_NAME",
    "HAVE_COMPILED",
    "DenseCache",
    "GradStore",
    "GraphAggregateCache",
    "GruCache",
    "Layer",
    "OptimizerState",
    "ParamStore",
    "adam_step",
    "as_tensor2",
    "check_finite_grads",
    "dense_backward",
    "dense_forward",
    "get_backend",
    "gradcheck",
    "graph_aggregate",
    "graph_aggregate_backward",
    "gru_cell_backward",
    "gru_cell_forward",
    "impl",
    "init_dense_layer",
    "init_gru",
    "init_mlp",
]
