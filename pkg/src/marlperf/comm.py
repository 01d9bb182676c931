"""The three inter-agent communication methods.

* all-to-all knowledge concatenation (pre-defined), feeding centralized
  critics;
* learnt graph communication: recurrent pairwise intention inference and
  a GNN edge scorer that decides the directed graph;
* pre-defined-graph belief propagation: per-agent recurrent belief
  updates from mean-pooled neighbor beliefs, states and action
  probabilities.

Every operation stamps its own duration to the Communication category
when given a recorder, and propagation reports the bytes it moves.
That attribution is this module's measurement contract.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ProtocolError
from .numerics import (
    GradStore,
    dense_backward,
    dense_forward,
    graph_aggregate,
    graph_aggregate_backward,
    gru_cell_backward,
    gru_cell_forward,
)
from .profiler import COMMUNICATION, clock


class CommGraph:
    """Directed communication graph over n agents. No self-edges; a
    predefined graph is immutable for the run."""

    def __init__(self, n, edges, provenance):
        edges = np.asarray(edges, dtype=bool)
        if edges.shape != (n, n):
            raise DimensionError(f"adjacency {edges.shape} for {n} agents")
        if edges.diagonal().any():
            raise ProtocolError("self-edges are not allowed")
        if provenance not in ("predefined", "learnt"):
            raise ValueError(f"unknown provenance {provenance!r}")
        self.n = n
        self.edges = edges
        self.provenance = provenance
        if provenance == "predefined":
            self.edges.setflags(write=False)
        self._edges_float = np.ascontiguousarray(edges, dtype=np.float64)

    def edges_float(self):
        return self._edges_float

    def in_neighbors(self, agent):
        return np.flatnonzero(self.edges[:, agent])

    def out_neighbors(self, agent):
        return np.flatnonzero(self.edges[agent, :])

    def edge_count(self):
        return int(self.edges.sum())

    @classmethod
    def empty(cls, n, provenance="predefined"):
        return cls(n, np.zeros((n, n), dtype=bool), provenance)

    @classmethod
    def complete(cls, n, provenance="predefined"):
        edges = np.ones((n, n), dtype=bool)
        np.fill_diagonal(edges, False)
        return cls(n, edges, provenance)

    @classmethod
    def chain(cls, n):
        edges = np.zeros((n, n), dtype=bool)
        for i in range(n - 1):
            edges[i, i + 1] = edges[i + 1, i] = True
        return cls(n, edges, "predefined")

    @classmethod
    def ring(cls, n):
        if n < 2:
            raise ValueError("a ring needs at least 2 nodes")
        edges = np.zeros((n, n), dtype=bool)
        for i in range(n):
            edges[i, (i + 1) % n] = edges[(i + 1) % n, i] = True
        return cls(n, edges, "predefined")


@dataclass
class Message:
    sender: int
    receiver: int
    payload: np.ndarray


@dataclass
class Belief:
    vector: np.ndarray
    agent: int
    version: int = 0


def _span(recorder, t0):
    if recorder is not None:
        recorder.stamp(COMMUNICATION, t0, clock())


def concat_all(observations, actions, n_actions, recorder=None):
    """All-to-all knowledge concatenation: one row per agent, each row
    the concatenation of every agent's observation and one-hot action in
    agent-index order. Rows are identical; the per-row copy keeps critic
    batching uniform. Reports n * row_width * 8 bytes moved."""
    t0 = clock()
    n = len(n_actions)
    if len(observations) != n or len(actions) != n:
        raise ProtocolError(
            f"expected {n} observations and actions, got "
            f"{len(observations)}/{len(actions)}"
        )
    parts = []
    for agent in range(n):
        obs = observations[agent]
        if obs is None:
            raise ProtocolError(f"missing observation for agent {agent}")
        parts.append(np.asarray(obs, dtype=np.float64))
        onehot = np.zeros(n_actions[agent])
        onehot[int(actions[agent])] = 1.0
        parts.append(onehot)
    row = np.concatenate(parts)
    out = np.ascontiguousarray(np.tile(row, (n, 1)))
    if recorder is not None:
        recorder.add_bytes(out.size * 8)
    _span(recorder, t0)
    return out


def _pair_rows(n):
    """Ordered (observer, other) pairs, observer-major, skipping self."""
    return [(i, j) for i in range(n) for j in range(n) if j != i]


@dataclass
class TomCache:
    n: int
    pair_index: list
    gru_cache: object
    mlp_caches: list


def tom_infer(encoded_obs, hidden, params, recorder=None):
    """Recurrent pairwise intention estimation.

    For every ordered pair (i, j != i) a GRU track is stepped on
    [enc_i || enc_j] and a 2-layer head turns the track state into one
    logit: agent i's estimate for agent j. Returns the (n, n-1) logit
    matrix, the updated pair hidden matrix (n*(n-1), track_dim), and the
    cache for the training-time backward.
    """
    t0 = clock()
    enc = np.asarray(encoded_obs, dtype=np.float64)
    n = enc.shape[0]
    pairs = _pair_rows(n)
    if hidden.shape[0] != len(pairs):
        raise DimensionError(
            f"pair hidden has {hidden.shape[0]} rows, expected {len(pairs)}"
        )
    left = enc[[i for i, _ in pairs]]
    right = enc[[j for _, j in pairs]]
    x = np.ascontiguousarray(np.hstack([left, right]))
    gru_params = params.view(0, 3)
    h_next, gru_cache = gru_cell_forward(x, hidden, gru_params)
    y1, c1 = dense_forward(h_next, params.layers[3], "relu")
    logits, c2 = dense_forward(y1, params.layers[4], "identity")
    intents = logits.reshape(n, n - 1) if n > 1 else np.zeros((1, 0))
    _span(recorder, t0)
    return intents, h_next, TomCache(n, pairs, gru_cache, [c1, c2])


def tom_infer_backward(grad_intents, cache):
    """Backward to the encoded observations; pair hidden inputs are
    training-time constants (single-step truncation)."""
    n = cache.n
    g = np.ascontiguousarray(grad_intents.reshape(-1, 1))
    gh, (gw2, gb2) = dense_backward(g, cache.mlp_caches[1])
    gh, (gw1, gb1) = dense_backward(gh, cache.mlp_caches[0])
    gx, _, gru_grads = gru_cell_backward(gh, cache.gru_cache)
    h = gx.shape[1] // 2
    grad_enc = np.zeros((n, h))
    for row, (i, j) in enumerate(cache.pair_index):
        grad_enc[i] += gx[row, :h]
        grad_enc[j] += gx[row, h:]
    grads = GradStore(
        gru_grads.layers
        + [
            _grad_layer(gw1, gb1),
            _grad_layer(gw2, gb2),
        ]
    )
    return grad_enc, grads


def _grad_layer(gw, gb):
    from .numerics.store import Layer

    return Layer(gw, gb, "dense")


@dataclass
class EdgeScoreCache:
    n: int
    pair_index: list
    agg_cache: object
    score_cache: object
    params: object


def edge_scores(intents, node_features, params, recorder=None):
    """Sigmoid score per directed edge.

    Node embeddings come from one graph-aggregate pass over the complete
    graph of [node_features || intents]; each ordered pair's embeddings
    are concatenated and scored by a dense sigmoid layer. Returns the
    (n, n) score matrix (diagonal fixed at 0) and a cache."""
    t0 = clock()
    feats = np.asarray(node_features, dtype=np.float64)
    n = feats.shape[0]
    x = np.ascontiguousarray(np.hstack([feats, intents]))
    emb, agg_cache = graph_aggregate(
        x, CommGraph.complete(n), params.view(0, 1), "tanh"
    )
    pairs = _pair_rows(n)
    if pairs:
        pair_x = np.ascontiguousarray(
            np.hstack([emb[[i for i, _ in pairs]], emb[[j for _, j in pairs]]])
        )
        s, score_cache = dense_forward(pair_x, params.layers[1], "sigmoid")
    else:
        s, score_cache = np.zeros((0, 1)), None
    scores = np.zeros((n, n))
    for row, (i, j) in enumerate(pairs):
        scores[i, j] = s[row, 0]
    _span(recorder, t0)
    return scores, EdgeScoreCache(n, pairs, agg_cache, score_cache, params)


def edge_scores_backward(grad_scores, cache):
    """Backward to [node_features || intents] and the scorer params."""
    n = cache.n
    if not cache.pair_index:
        width = cache.params.layers[0].fan_in
        return np.zeros((n, width)), GradStore.zeros_like(cache.params)
    g = np.ascontiguousarray(
        [[grad_scores[i, j]] for i, j in cache.pair_index]
    )
    gpair, (gw2, gb2) = dense_backward(g, cache.score_cache)
    d = gpair.shape[1] // 2
    gemb = np.zeros((n, d))
    for row, (i, j) in enumerate(cache.pair_index):
        gemb[i] += gpair[row, :d]
        gemb[j] += gpair[row, d:]
    gx, (gw1, gb1) = graph_aggregate_backward(gemb, cache.agg_cache)
    grads = GradStore([_grad_layer(gw1, gb1), _grad_layer(gw2, gb2)])
    return gx, grads


def message_sender(intents, node_features, params, threshold=0.5, recorder=None):
    """Learnt communication graph: keep directed edges whose sigmoid
    score strictly exceeds the threshold."""
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    t0 = clock()
    scores, _ = edge_scores(intents, node_features, params)
    edges = scores > threshold
    np.fill_diagonal(edges, False)
    _span(recorder, t0)
    return CommGraph(scores.shape[0], edges, "learnt")


def propagate(graph, payload_fn, recorder=None):
    """Deliver one message per directed edge; each inbox is ordered by
    sender index. Total bytes (edges * payload width * 8) are recorded."""
    t0 = clock()
    inboxes = [[] for _ in range(graph.n)]
    width = None
    total = 0
    for sender in range(graph.n):
        receivers = graph.out_neighbors(sender)
        if receivers.size == 0:
            continue
        payload = np.asarray(payload_fn(sender), dtype=np.float64)
        if payload.ndim != 1:
            raise ProtocolError(f"payload for sender {sender} is not a vector")
        if width is None:
            width = payload.size
        elif payload.size != width:
            raise ProtocolError(
                f"payload width {payload.size} from sender {sender} "
                f"differs from {width}"
            )
        for receiver in receivers:
            inboxes[int(receiver)].append(Message(sender, int(receiver), payload))
            total += payload.size * 8
    if recorder is not None:
        recorder.add_bytes(total)
    _span(recorder, t0)
    return inboxes


def inbox_means(inboxes, width):
    """Mean payload per inbox; zero vector where the inbox is empty."""
    out = np.zeros((len(inboxes), width))
    for i, box in enumerate(inboxes):
        if box:
            out[i] = np.mean([m.payload for m in box], axis=0)
    return out


@dataclass
class BeliefCache:
    agent: int
    x: np.ndarray
    enc_cache: object
    gru_cache: object


def neurcomm_update_belief(
    agent,
    own_belief,
    neighbor_beliefs,
    neighbor_states,
    neighbor_action_probs,
    params,
    recorder=None,
):
    """One belief update: a dense encoding of the mean-pooled neighbor
    beliefs, states and action probabilities drives a GRU step on the
    agent's own belief. Isolated agents encode a zero input."""
    t0 = clock()
    if not (len(neighbor_beliefs) == len(neighbor_states) == len(neighbor_action_probs)):
        raise ProtocolError(
            f"neighbor lists for agent {agent} are not aligned: "
            f"{len(neighbor_beliefs)}/{len(neighbor_states)}/"
            f"{len(neighbor_action_probs)}"
        )
    enc_layer = params.layers[0]
    if neighbor_beliefs:
        x = np.concatenate(
            [
                np.mean(neighbor_beliefs, axis=0),
                np.mean(neighbor_states, axis=0),
                np.mean(neighbor_action_probs, axis=0),
            ]
        )
    else:
        x = np.zeros(enc_layer.fan_in)
    x = np.ascontiguousarray(x.reshape(1, -1))
    enc, enc_cache = dense_forward(x, enc_layer, "tanh")
    h_prev = np.ascontiguousarray(own_belief.vector.reshape(1, -1))
    h_next, gru_cache = gru_cell_forward(enc, h_prev, params.view(1, 4))
    new = Belief(h_next.ravel(), agent, own_belief.version + 1)
    _span(recorder, t0)
    return new, BeliefCache(agent, x, enc_cache, gru_cache)


def belief_update_backward(grad_belief, cache):
    """Backward through one belief update to the comm-net parameters.
    Round inputs (neighbor pools, previous belief) are training-time
    constants under single-round truncation."""
    g = np.ascontiguousarray(grad_belief.reshape(1, -1))
    genc, _, gru_grads = gru_cell_backward(g, cache.gru_cache)
    _, (gw, gb) = dense_backward(genc, cache.enc_cache)
    return GradStore([_grad_layer(gw, gb)] + gru_grads.layers)


def belief_round(
    graph,
    all_beliefs,
    all_states,
    all_action_probs,
    params,
    recorder=None,
    want_cache=False,
):
    """Synchronous belief-propagation round over a pre-defined graph.

    All new beliefs are computed from the previous round's values, so
    the result is independent of agent evaluation order. params may be
    one shared ParamStore or a per-agent sequence."""
    if graph.provenance != "predefined":
        raise ProtocolError("belief propagation requires a pre-defined graph")
    t0 = clock()
    per_agent = params if isinstance(params, (list, tuple)) else [params] * graph.n
    if len(per_agent) != graph.n:
        raise ProtocolError(
            f"{len(per_agent)} comm-nets for {graph.n} agents"
        )
    new_beliefs, caches = [], []
    for agent in range(graph.n):
        nbrs = graph.in_neighbors(agent)
        belief, cache = neurcomm_update_belief(
            agent,
            all_beliefs[agent],
            [all_beliefs[j].vector for j in nbrs],
            [np.atleast_1d(all_states[j]) for j in nbrs],
            [np.atleast_1d(all_action_probs[j]) for j in nbrs],
            per_agent[agent],
        )
        new_beliefs.append(belief)
        caches.append(cache)
    if recorder is not None and graph.n > 0:
        # Per edge one belief vector, one local state, one action
        # distribution travel to the neighbor.
        width = (
            all_beliefs[0].vector.size
            + np.atleast_1d(all_states[0]).size
            + np.atleast_1d(all_action_probs[0]).size
        )
        recorder.add_bytes(graph.edge_count() * width * 8)
    _span(recorder, t0)
    return (new_beliefs, caches) if want_cache else (new_beliefs, None)
