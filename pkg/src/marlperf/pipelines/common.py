"""Shared pipeline plumbing: experiences, replay, returns, MLP helpers."""

import threading
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ContractViolation
from ..numerics import dense_backward, dense_forward
from ..numerics.backend import impl


@dataclass
class Experience:
    obs: list  # per-agent observation vectors
    actions: np.ndarray  # (n,) ints
    rewards: np.ndarray  # (n,)
    next_obs: list
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring with FIFO eviction. Inserts are linearizable
    (single lock); a minibatch draw holds the same lock, so it never
    interleaves with an insert."""

    def __init__(self, capacity):
        if capacity <= 0:
            raise ConfigError("replay buffer capacity must be positive")
        self.capacity = capacity
        self._storage = [None] * capacity
        self._cursor = 0
        self.size = 0
        self._lock = threading.Lock()

    def insert(self, experience):
        with self._lock:
            self._storage[self._cursor] = experience
            self._cursor = (self._cursor + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)

    def insert_batch(self, experiences):
        with self._lock:
            for experience in experiences:
                self._storage[self._cursor] = experience
                self._cursor = (self._cursor + 1) % self.capacity
                self.size = min(self.size + 1, self.capacity)

    def sample(self, batch, rng):
        """Uniform without replacement within the minibatch."""
        with self._lock:
            if batch > self.size:
                return None
            idx = rng.choice(self.size, size=batch, replace=False)
            if self.size < self.capacity:
                return [self._storage[i] for i in idx]
            # Full ring: logical order starts at the cursor.
            return [
                self._storage[(self._cursor + i) % self.capacity] for i in idx
            ]

    def contents(self):
        with self._lock:
            if self.size < self.capacity:
                return [self._storage[i] for i in range(self.size)]
            return [
                self._storage[(self._cursor + i) % self.capacity]
                for i in range(self.capacity)
            ]


@dataclass
class OnPolicyBatch:
    """Trajectory segments consumed exactly once."""

    segments: list  # list of (steps, bootstrap_value) pairs
    consumed: bool = False

    def consume(self):
        if self.consumed:
            raise ContractViolation("on-policy batch already consumed")
        self.consumed = True

    def step_count(self):
        return sum(len(steps) for steps, _ in self.segments)


def discounted_returns(rewards, gamma, bootstrap=0.0):
    """G_t = r_t + gamma * G_{t+1}, with G_T seeded by the bootstrap."""
    if not 0.0 <= gamma < 1.0:
        raise ConfigError(f"gamma must be in [0, 1), got {gamma}")
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    carry = bootstrap
    for t in range(rewards.shape[0] - 1, -1, -1):
        carry = rewards[t] + gamma * carry
        out[t] = carry
    return out


def returns_with_resets(rewards, dones, gamma, bootstrap):
    """Per-column discounted returns; a done step ends bootstrapping."""
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    carry = np.asarray(bootstrap, dtype=np.float64).copy()
    for t in range(rewards.shape[0] - 1, -1, -1):
        if dones[t]:
            carry = np.zeros_like(carry)
        carry = rewards[t] + gamma * carry
        out[t] = carry
    return out


def mlp_forward(x, params, activations):
    caches = []
    h = x
    for layer, act in zip(params.layers, activations):
        h, cache = dense_forward(h, layer, act)
        caches.append(cache)
    return h, caches


def mlp_backward(grad_out, caches, grads=None, first_layer=0):
    """Backward through a stack of dense layers; per-layer gradients are
    accumulated into grads (if given) starting at first_layer."""
    g = grad_out
    layer_grads = []
    for i in range(len(caches) - 1, -1, -1):
        g, (gw, gb) = dense_backward(g, caches[i])
        layer_grads.append((gw, gb))
    layer_grads.reverse()
    if grads is not None:
        for i, (gw, gb) in enumerate(layer_grads):
            grads.add_layer(first_layer + i, gw, gb)
    return g, layer_grads


def soft_update(target, online, tau):
    """theta' <- tau * theta + (1 - tau) * theta', element-wise exact."""
    for tl, ol in zip(target.layers, online.layers):
        tl.weights *= 1.0 - tau
        tl.weights += tau * ol.weights
        tl.bias *= 1.0 - tau
        tl.bias += tau * ol.bias


def log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def entropy_rows(probs):
    safe = np.clip(probs, 1e-300, None)
    return -(probs * np.log(safe)).sum(axis=1)


def sample_categorical(probs, rng):
    """Inverse-CDF draw per row; deterministic given the generator."""
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=1)
    return np.minimum(
        (u[:, None] > cum).sum(axis=1), probs.shape[1] - 1
    ).astype(int)


def policy_loss_and_logit_grad(logits, actions, advantages, entropy_coef):
    """Loss -mean(A * log pi(a)) - entropy_coef * mean(H), plus its exact
    gradient with respect to the logits (advantages held constant)."""
    m = logits.shape[0]
    probs = impl.softmax_rows(np.ascontiguousarray(logits))
    logp = log_softmax(logits)
    picked = logp[np.arange(m), actions]
    ent = entropy_rows(probs)
    loss = -(advantages * picked).mean() - entropy_coef * ent.mean()
    onehot = np.zeros_like(probs)
    onehot[np.arange(m), actions] = 1.0
    glogits = (advantages[:, None] * (probs - onehot)) / m
    safe = np.clip(probs, 1e-300, None)
    glogits += entropy_coef * probs * (np.log(safe) + ent[:, None]) / m
    return loss, glogits
