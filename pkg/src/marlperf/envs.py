"""Desk-scale benchmark environments.

Two stand-ins with per-agent partial observability, deterministic given
their seed:

* cooperative navigation: point agents on [-1,1]^2 cover landmarks,
  discrete 5-action movement, shared coverage reward plus collision
  penalties;
* networked queueing: nodes on a chain/ring serve local queues or absorb
  neighbor spillover, local reward -queue.

Step functions are pure on the array state; the generator object is
carried forward and advances, so states form a linear history. Deep-copy
a state before branching alternative actions from it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ActionError, ConfigError, ContractViolation

STEP_SIZE = 0.1
COLLISION_RADIUS = 0.1
COOPNAV_MOVES = np.array(
    [[0.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]]
)

SERVICE_RATE = 0.3
SPILL_FRACTION = 0.5
SPILL_THRESHOLD = 0.2


@dataclass
class StepResult:
    state: object
    rewards: np.ndarray
    done: bool


@dataclass
class CoopNavState:
    agent_pos: np.ndarray  # (n, 2)
    landmark_pos: np.ndarray  # (n, 2)
    t: int
    limit: int
    rng: np.random.Generator


def coopnav_reset(n_agents, seed, limit=25):
    if n_agents < 1:
        raise ConfigError("cooperative navigation needs at least one agent")
    rng = np.random.default_rng(seed)
    return CoopNavState(
        agent_pos=rng.uniform(-1.0, 1.0, size=(n_agents, 2)),
        landmark_pos=rng.uniform(-1.0, 1.0, size=(n_agents, 2)),
        t=0,
        limit=limit,
        rng=rng,
    )


def _check_actions(actions, n, n_actions):
    if len(actions) != n:
        raise ActionError(f"expected {n} actions, got {len(actions)}")
    for agent, a in enumerate(actions):
        if not 0 <= int(a) < n_actions:
            raise ActionError(
                f"agent {agent} chose action {a}, action space has {n_actions}"
            )


def coopnav_step(state, actions):
    """Each agent moves one step of 0.1 in {stay, N, S, E, W}; positions
    clamp to the arena. Shared reward term is -sum over landmarks of the
    minimum agent distance; each agent within 0.1 of another takes an
    extra -1."""
    n = state.agent_pos.shape[0]
    if state.t >= state.limit:
        raise ContractViolation("stepping a finished episode")
    _check_actions(actions, n, 5)
    moves = COOPNAV_MOVES[np.asarray(actions, dtype=int)]
    pos = np.clip(state.agent_pos + STEP_SIZE * moves, -1.0, 1.0)

    diff = state.landmark_pos[:, None, :] - pos[None, :, :]
    dists = np.sqrt((diff * diff).sum(axis=2))  # (landmark, agent)
    shared = -dists.min(axis=1).sum()

    rewards = np.full(n, shared)
    if n > 1:
        pair = pos[:, None, :] - pos[None, :, :]
        pdist = np.sqrt((pair * pair).sum(axis=2))
        np.fill_diagonal(pdist, np.inf)
        rewards = rewards - (pdist.min(axis=1) < COLLISION_RADIUS).astype(float)

    nxt = CoopNavState(pos, state.landmark_pos, state.t + 1, state.limit, state.rng)
    return StepResult(nxt, rewards, nxt.t >= state.limit)


def coopnav_observe(state, agent):
    """Own position, relative positions of all landmarks, and relative
    positions of the two nearest other agents (fewer when n < 3)."""
    n = state.agent_pos.shape[0]
    if not 0 <= agent < n:
        raise ActionError(f"agent index {agent} out of range for {n} agents")
    own = state.agent_pos[agent]
    parts = [own, (state.landmark_pos - own).ravel()]
    others = [j for j in range(n) if j != agent]
    if others:
        d = np.sqrt(((state.agent_pos[others] - own) ** 2).sum(axis=1))
        ranked = sorted(zip(d, others))[: min(2, len(others))]
        for _, j in ranked:
            parts.append(state.agent_pos[j] - own)
    return np.concatenate(parts)


def coopnav_obs_width(n_agents):
    return 2 + 2 * n_agents + 2 * min(2, n_agents - 1)


@dataclass
class NetworkedState:
    queues: np.ndarray  # (n,), in [0, 1]
    t: int
    limit: int
    inflow_rate: float
    rng: np.random.Generator


def make_topology(n_agents, topology):
    if topology == "chain":
        if n_agents < 1:
            raise ConfigError("chain needs at least one node")
        neighbors = [
            sorted({j for j in (i - 1, i + 1) if 0 <= j < n_agents})
            for i in range(n_agents)
        ]
    elif topology == "ring":
        if n_agents < 2:
            raise ConfigError("ring needs at least two nodes")
        neighbors = [
            sorted({(i - 1) % n_agents, (i + 1) % n_agents} - {i})
            for i in range(n_agents)
        ]
    else:
        raise ConfigError(f"unknown topology {topology!r}")
    return neighbors


def networked_reset(n_agents, topology, seed, limit=40, inflow_rate=0.25):
    neighbors = make_topology(n_agents, topology)  # validates
    rng = np.random.default_rng(seed)
    state = NetworkedState(
        queues=rng.uniform(0.0, 1.0, size=n_agents),
        t=0,
        limit=limit,
        inflow_rate=inflow_rate,
        rng=rng,
    )
    return state, neighbors


def networked_step(state, actions, neighbors):
    """Queue dynamics, executed synchronously on the previous queues:

        inflow_i   = rate * U_i,  U_i ~ uniform[0,1) from the state rng
        spill_i    = 0.5 * max(0, q_i - 0.2)   (split over neighbors)
        served_i   = 0.3 if a_i == 0 (serve-self) else 0
        incoming_i = sum_j spill_j/deg(j) over neighbors j,
                     zeroed when a_i == 1 (absorb-neighbor-flow)
        q_i'       = clamp(q_i + inflow_i - spill_i - served_i + incoming_i)

    reward_i = -q_i' (local)."""
    n = state.queues.size
    if state.t >= state.limit:
        raise ContractViolation("stepping a finished episode")
    _check_actions(actions, n, 2)
    a = np.asarray(actions, dtype=int)
    inflow = state.inflow_rate * state.rng.uniform(0.0, 1.0, size=n)
    spill = SPILL_FRACTION * np.maximum(0.0, state.queues - SPILL_THRESHOLD)
    deg = np.array([max(len(nb), 1) for nb in neighbors], dtype=float)
    incoming = np.zeros(n)
    for i, nbrs in enumerate(neighbors):
        for j in nbrs:
            incoming[i] += spill[j] / deg[j]
    incoming[a == 1] = 0.0
    served = np.where(a == 0, SERVICE_RATE, 0.0)
    queues = np.clip(
        state.queues + inflow - spill - served + incoming, 0.0, 1.0
    )
    nxt = NetworkedState(
        queues, state.t + 1, state.limit, state.inflow_rate, state.rng
    )
    return StepResult(nxt, -queues.copy(), nxt.t >= state.limit)


def networked_observe(state, agent, neighbors):
    """Own queue level followed by neighbor queue levels in index order."""
    n = state.queues.size
    if not 0 <= agent < n:
        raise ActionError(f"agent index {agent} out of range for {n} agents")
    return np.concatenate(
        [[state.queues[agent]], state.queues[neighbors[agent]]]
    )


class CoopNav:
    """Stateful wrapper used by pipelines; one instance per rollout
    thread, nothing shared."""

    name = "coopnav"

    def __init__(self, n_agents, seed, limit=25):
        self.n_agents = n_agents
        self.limit = limit
        self._seed = seed
        self._episode = 0
        self.state = coopnav_reset(n_agents, seed, limit)

    def n_actions(self, agent=0):
        return 5

    def obs_width(self, agent=0):
        return coopnav_obs_width(self.n_agents)

    def observe(self, agent):
        return coopnav_observe(self.state, agent)

    def observe_all(self):
        return [coopnav_observe(self.state, i) for i in range(self.n_agents)]

    def local_state(self, agent):
        return self.state.agent_pos[agent].copy()

    def step(self, actions):
        result = coopnav_step(self.state, actions)
        self.state = result.state
        return result.rewards, result.done

    def reset_episode(self):
        self._episode += 1
        self.state = coopnav_reset(
            self.n_agents, self._seed + 9973 * self._episode, self.limit
        )


class Networked:
    name = "networked"

    def __init__(self, n_agents, seed, topology="ring", limit=40, inflow_rate=0.25):
        self.n_agents = n_agents
        self.topology = topology
        self.limit = limit
        self.inflow_rate = inflow_rate
        self._seed = seed
        self._episode = 0
        self.state, self.neighbors = networked_reset(
            n_agents, topology, seed, limit, inflow_rate
        )

    def n_actions(self, agent=0):
        return 2

    def obs_width(self, agent):
        return 1 + len(self.neighbors[agent])

    def observe(self, agent):
        return networked_observe(self.state, agent, self.neighbors)

    def observe_all(self):
        return [self.observe(i) for i in range(self.n_agents)]

    def local_state(self, agent):
        return np.array([self.state.queues[agent]])

    def comm_graph(self):
        from .comm import CommGraph

        edges = np.zeros((self.n_agents, self.n_agents), dtype=bool)
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                edges[i, j] = True
        return CommGraph(self.n_agents, edges, "predefined")

    def step(self, actions):
        result = networked_step(self.state, actions, self.neighbors)
        self.state = result.state
        return result.rewards, result.done

    def reset_episode(self):
        self._episode += 1
        self.state, _ = networked_reset(
            self.n_agents,
            self.topology,
            self._seed + 9973 * self._episode,
            self.limit,
            self.inflow_rate,
        )


def make_env(name, n_agents, seed, **kwargs):
    if name == "coopnav":
        kwargs.pop("topology", None)
        return CoopNav(n_agents, seed, **kwargs)
    if name == "networked":
        return Networked(n_agents, seed, **kwargs)
    raise ConfigError(f"unknown environment {name!r}")
