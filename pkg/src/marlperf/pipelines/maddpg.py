"""Replay-buffer CTDE pipeline with all-to-all knowledge concatenation.

Each agent owns four networks: a decentralized policy over its own
observation, a centralized action-value network over the concatenation
of every agent's observation and action, and target copies of both.
Sampling runs on rollout threads against private environment copies;
updates draw uniform minibatches and train actor-critic style with soft
target updates.
"""

from dataclasses import dataclass

import numpy as np

from ..numerics import GradStore, OptimizerState, adam_step, init_mlp
from ..numerics.backend import impl
from ..profiler import (
    BUFFER_OPS,
    COMMUNICATION,
    ENV_STEP,
    GRADIENT_UPDATE,
    POLICY_INFERENCE,
    clock,
)
from .common import Experience, mlp_backward, mlp_forward, soft_update

MLP_ACTS = ("relu", "identity")


@dataclass
class MaddpgModels:
    policies: list  # ParamStore per agent
    values: list
    target_policies: list
    target_values: list
    policy_opts: list
    value_opts: list
    obs_widths: list
    n_actions: list

    @property
    def n_agents(self):
        return len(self.policies)

    def concat_width(self):
        return sum(self.obs_widths) + sum(self.n_actions)

    def snapshot_policies(self):
        return [p.copy() for p in self.policies]


def init_maddpg(obs_widths, n_actions, hidden, lr, rng):
    n = len(obs_widths)
    concat_w = sum(obs_widths) + sum(n_actions)
    policies, values = [], []
    for i in range(n):
        policies.append(init_mlp((obs_widths[i], hidden, n_actions[i]), rng))
        values.append(init_mlp((concat_w, hidden, 1), rng))
    return MaddpgModels(
        policies=policies,
        values=values,
        target_policies=[p.copy() for p in policies],
        target_values=[v.copy() for v in values],
        policy_opts=[OptimizerState(p, lr=lr) for p in policies],
        value_opts=[OptimizerState(v, lr=lr) for v in values],
        obs_widths=list(obs_widths),
        n_actions=list(n_actions),
    )


def act(policies, obs_list, n_actions, noise, rng):
    """Greedy action from each decentralized policy, replaced by a
    uniform draw with probability `noise`."""
    actions = np.empty(len(policies), dtype=int)
    for i, policy in enumerate(policies):
        logits, _ = mlp_forward(
            np.asarray(obs_list[i], dtype=np.float64).reshape(1, -1),
            policy,
            MLP_ACTS,
        )
        actions[i] = int(np.argmax(logits[0]))
    explore = rng.random(len(policies)) < noise
    for i in range(len(policies)):
        draw = rng.integers(n_actions[i])  # drawn every step: stable stream
        if explore[i]:
            actions[i] = int(draw)
    return actions


def maddpg_sample(
    policies,
    env,
    sink,
    steps,
    noise,
    rng,
    recorder=None,
    stop_event=None,
    episode_returns=None,
):
    """Run `steps` environment steps, appending one Experience per step
    to the sink. Insert time is stamped Communication. Returns the
    number of samples produced."""
    produced = 0
    episode_reward = 0.0
    for _ in range(steps):
        if stop_event is not None and stop_event.is_set():
            break
        t0 = clock()
        obs = env.observe_all()
        t1 = clock()
        actions = act(policies, obs, [env.n_actions(i) for i in range(env.n_agents)], noise, rng)
        t2 = clock()
        rewards, done = env.step(actions)
        next_obs = env.observe_all()
        t3 = clock()
        sink.insert(Experience(obs, actions, rewards.copy(), next_obs, done))
        t4 = clock()
        if recorder is not None:
            recorder.stamp(ENV_STEP, t0, t1)
            recorder.stamp(POLICY_INFERENCE, t1, t2)
            recorder.stamp(ENV_STEP, t2, t3)
            recorder.stamp(COMMUNICATION, t3, t4)
        produced += 1
        episode_reward += float(rewards.mean())
        if done:
            if episode_returns is not None:
                episode_returns.append(episode_reward)
            episode_reward = 0.0
            env.reset_episode()
    return produced


def _concat_batch(obs_cols, onehot_cols, recorder=None):
    """Batched knowledge concatenation: per sample, every agent's
    observation and one-hot action in agent order."""
    t0 = clock()
    parts = []
    for obs, onehot in zip(obs_cols, onehot_cols):
        parts.append(obs)
        parts.append(onehot)
    out = np.ascontiguousarray(np.hstack(parts))
    if recorder is not None:
        recorder.add_bytes(out.size * 8)
        recorder.stamp(COMMUNICATION, t0, clock())
    return out


def _onehot(indices, width):
    out = np.zeros((indices.size, width))
    out[np.arange(indices.size), indices] = 1.0
    return out


def stack_batch(samples, n_agents):
    obs_cols = [
        np.ascontiguousarray([s.obs[i] for s in samples]) for i in range(n_agents)
    ]
    next_cols = [
        np.ascontiguousarray([s.next_obs[i] for s in samples])
        for i in range(n_agents)
    ]
    actions = np.ascontiguousarray([s.actions for s in samples]).astype(int)
    rewards = np.ascontiguousarray([s.rewards for s in samples])
    return obs_cols, next_cols, actions, rewards


def critic_targets(models, next_cols, rewards, gamma, recorder=None):
    """y_i = r_i + gamma * Q'_i(concat(next obs, target-policy actions)).

    Time-limit ends are treated as non-terminal (infinite-horizon
    discounting), so no done mask appears here."""
    n = models.n_agents
    target_onehots = []
    for j in range(n):
        logits, _ = mlp_forward(next_cols[j], models.target_policies[j], MLP_ACTS)
        target_onehots.append(_onehot(np.argmax(logits, axis=1), models.n_actions[j]))
    xnext = _concat_batch(next_cols, target_onehots, recorder)
    ys = []
    for i in range(n):
        qnext, _ = mlp_forward(xnext, models.target_values[i], MLP_ACTS)
        ys.append(rewards[:, i] + gamma * qnext[:, 0])
    return ys


def loss_and_grads(models, obs_cols, next_cols, actions, rewards, gamma, recorder=None):
    """Per-agent critic and actor losses with their exact gradients.

    The critic loss is differentiated with respect to the value network
    only; the actor loss with respect to the policy only (the critic is
    held fixed while it scores the policy's softmax relaxation).
    Returns (losses, value_grads, policy_grads).
    """
    n = models.n_agents
    batch = obs_cols[0].shape[0]
    ys = critic_targets(models, next_cols, rewards, gamma, recorder)
    recorded_onehots = [
        _onehot(actions[:, j], models.n_actions[j]) for j in range(n)
    ]
    x = _concat_batch(obs_cols, recorded_onehots, recorder)

    # Column offset of agent i's action block inside the concat row.
    offsets = []
    off = 0
    for j in range(n):
        off += obs_cols[j].shape[1]
        offsets.append(off)
        off += models.n_actions[j]

    losses, value_grads, policy_grads = [], [], []
    for i in range(n):
        q, vcaches = mlp_forward(x, models.values[i], MLP_ACTS)
        err = q[:, 0] - ys[i]
        critic_loss = float((err * err).mean())
        vgrads = GradStore.zeros_like(models.values[i])
        mlp_backward((2.0 * err / batch).reshape(-1, 1), vcaches, vgrads)

        logits, pcaches = mlp_forward(obs_cols[i], models.policies[i], MLP_ACTS)
        probs = impl.softmax_rows(np.ascontiguousarray(logits))
        xact = x.copy()
        xact[:, offsets[i] : offsets[i] + models.n_actions[i]] = probs
        qa, acaches = mlp_forward(np.ascontiguousarray(xact), models.values[i], MLP_ACTS)
        actor_loss = float(-qa[:, 0].mean())
        gx, _ = mlp_backward(np.full((batch, 1), -1.0 / batch), acaches)
        gprobs = gx[:, offsets[i] : offsets[i] + models.n_actions[i]]
        glogits = impl.softmax_rows_backward(
            np.ascontiguousarray(gprobs), probs
        )
        pgrads = GradStore.zeros_like(models.policies[i])
        mlp_backward(glogits, pcaches, pgrads)

        losses.append({"critic": critic_loss, "actor": actor_loss})
        value_grads.append(vgrads)
        policy_grads.append(pgrads)
    return losses, value_grads, policy_grads


def maddpg_update(models, buffer, batch, gamma, tau, rng, recorder=None):
    """One gradient step per agent from a uniform minibatch, then soft
    target updates. Returns per-agent losses, or None when the buffer
    cannot yet fill a minibatch (caller retries later)."""
    t0 = clock()
    samples = buffer.sample(batch, rng)
    t1 = clock()
    if recorder is not None:
        recorder.stamp(BUFFER_OPS, t0, t1)
    if samples is None:
        return None
    obs_cols, next_cols, actions, rewards = stack_batch(samples, models.n_agents)
    t2 = clock()
    if recorder is not None:
        recorder.stamp(BUFFER_OPS, t1, t2)
    comm_before = recorder.times[COMMUNICATION] if recorder is not None else 0.0
    losses, value_grads, policy_grads = loss_and_grads(
        models, obs_cols, next_cols, actions, rewards, gamma, recorder
    )
    t3 = clock()
    for i in range(models.n_agents):
        adam_step(models.values[i], value_grads[i], models.value_opts[i])
        adam_step(models.policies[i], policy_grads[i], models.policy_opts[i])
        soft_update(models.target_values[i], models.values[i], tau)
        soft_update(models.target_policies[i], models.policies[i], tau)
    t4 = clock()
    if recorder is not None:
        # The concat spans inside loss_and_grads were stamped as
        # Communication; the rest of the loss span is gradient math.
        comm_delta = recorder.times[COMMUNICATION] - comm_before
        recorder.stamp(GRADIENT_UPDATE, t2, max(t2, t3 - comm_delta))
        recorder.stamp(GRADIENT_UPDATE, t3, t4)
    return losses
