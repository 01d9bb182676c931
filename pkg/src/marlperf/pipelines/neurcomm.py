"""Decentralized single-threaded pipeline with belief propagation.

Every agent owns an actor, a critic and a communication net. Each step
runs one synchronous belief round over the pre-defined graph, then each
agent acts on [own observation || own belief]. After `horizon` steps the
agents take advantage-actor-critic gradient steps; communication-net
gradients flow through the final belief round only (single-round
truncation), with earlier beliefs treated as rollout constants. Sample
Generation and Model Update are strictly sequential.
"""

from dataclasses import dataclass

import numpy as np

from .. import comm as comms
from ..numerics import (
    GradStore,
    OptimizerState,
    adam_step,
    gru_cell_backward,
    gru_cell_forward,
    init_mlp,
)
from ..numerics.backend import impl
from ..numerics.store import ParamStore
from ..profiler import (
    COMMUNICATION,
    ENV_STEP,
    GRADIENT_UPDATE,
    POLICY_INFERENCE,
    clock,
)
from .common import (
    mlp_backward,
    mlp_forward,
    policy_loss_and_logit_grad,
    returns_with_resets,
    sample_categorical,
)

ACTOR_ACTS = ("relu", "identity")
CRITIC_ACTS = ("relu", "identity")


@dataclass
class NeurcommModels:
    actors: list  # per agent: (obs_w + belief) -> hidden -> n_actions
    critics: list  # per agent: (obs_w + belief) -> hidden -> 1
    comm_nets: list  # per agent: dense encoder + belief GRU
    actor_opts: list
    critic_opts: list
    comm_opts: list
    belief_dim: int
    n_actions: int

    @property
    def n_agents(self):
        return len(self.actors)


def init_neurcomm(obs_widths, state_width, n_actions, hidden, belief_dim, lr, rng):
    from ..numerics.store import ParamStore, init_dense_layer, init_gru

    n = len(obs_widths)
    actors, critics, comm_nets = [], [], []
    pool_w = belief_dim + state_width + n_actions
    for i in range(n):
        actors.append(init_mlp((obs_widths[i] + belief_dim, hidden, n_actions), rng))
        critics.append(init_mlp((obs_widths[i] + belief_dim, hidden, 1), rng))
        enc = init_dense_layer(pool_w, belief_dim, rng)
        gru = init_gru(belief_dim, belief_dim, rng)
        comm_nets.append(ParamStore([enc] + gru.layers))
    return NeurcommModels(
        actors=actors,
        critics=critics,
        comm_nets=comm_nets,
        actor_opts=[OptimizerState(a, lr=lr) for a in actors],
        critic_opts=[OptimizerState(c, lr=lr) for c in critics],
        comm_opts=[OptimizerState(c, lr=lr) for c in comm_nets],
        belief_dim=belief_dim,
        n_actions=n_actions,
    )


def fresh_beliefs(n_agents, belief_dim):
    return [comms.Belief(np.zeros(belief_dim), agent, 0) for agent in range(n_agents)]


@dataclass
class NeurcommStep:
    obs: list  # per-agent vectors (widths may differ)
    beliefs: np.ndarray  # (n, belief_dim): beliefs the agents acted on
    actions: np.ndarray
    rewards: np.ndarray
    probs: np.ndarray  # (n, n_actions)
    done: bool


def rollout(
    models,
    env,
    graph,
    beliefs,
    horizon,
    rng,
    recorder=None,
    prev_probs=None,
    stop_event=None,
    episode_returns=None,
    episode_accum=None,
):
    """Collect `horizon` steps; returns (steps, final beliefs, caches of
    the final belief round, probs carried to the next rollout)."""
    n = models.n_agents
    steps = []
    last_caches = None
    probs_prev = (
        prev_probs if prev_probs is not None else np.zeros((n, models.n_actions))
    )
    acc = episode_accum if episode_accum is not None else [0.0]
    for k in range(horizon):
        if stop_event is not None and stop_event.is_set():
            break
        states = [env.local_state(i) for i in range(n)]
        want_cache = k == horizon - 1
        beliefs, caches = comms.belief_round(
            graph,
            beliefs,
            states,
            [probs_prev[i] for i in range(n)],
            models.comm_nets,
            recorder,
            want_cache=want_cache,
        )
        if want_cache:
            last_caches = caches
        t0 = clock()
        belief_mat = np.vstack([b.vector for b in beliefs])
        obs = [env.observe(i) for i in range(n)]
        probs = np.zeros((n, models.n_actions))
        actions = np.zeros(n, dtype=int)
        for i in range(n):
            x = np.concatenate([obs[i], belief_mat[i]]).reshape(1, -1)
            logits, _ = mlp_forward(x, models.actors[i], ACTOR_ACTS)
            probs[i] = impl.softmax_rows(np.ascontiguousarray(logits))[0]
        actions = sample_categorical(probs, rng)
        t1 = clock()
        rewards, done = env.step(actions)
        t2 = clock()
        if recorder is not None:
            recorder.stamp(POLICY_INFERENCE, t0, t1)
            recorder.stamp(ENV_STEP, t1, t2)
        steps.append(
            NeurcommStep(obs, belief_mat, actions, rewards.copy(), probs, done)
        )
        acc[0] += float(rewards.mean())
        if done:
            if episode_returns is not None:
                episode_returns.append(acc[0])
            acc[0] = 0.0
            env.reset_episode()
            beliefs = fresh_beliefs(n, models.belief_dim)
            probs_prev = np.zeros((n, models.n_actions))
        else:
            probs_prev = probs
    return steps, beliefs, last_caches, probs_prev


def loss_and_grads(
    models,
    steps,
    final_boot_obs,
    final_beliefs,
    last_caches,
    gamma,
    entropy_coef,
    recorder=None,
    frozen_advantages=None,
    frozen_boot=None,
):
    """Joint loss over all agents with exact gradients.

    Actor/critic inputs replay the recorded beliefs except at the last
    step, where the belief is recomputed through the cached final round
    so its gradient reaches each agent's communication net.
    """
    n = models.n_agents
    T = len(steps)
    comm_t0 = clock()
    recomputed_last = []
    last_belief_caches = []
    for i in range(n):
        cache = last_caches[i]
        enc, enc_cache = mlp_forward(
            cache.x, _enc_store(models.comm_nets[i]), ("tanh",)
        )
        h_prev = np.ascontiguousarray(cache.gru_cache.h_prev)  # rollout constant
        h_next, gru_cache = gru_cell_forward(
            enc, h_prev, _gru_store(models.comm_nets[i])
        )
        recomputed_last.append(h_next.ravel())
        last_belief_caches.append((enc_cache, gru_cache))
    comm_fwd = clock() - comm_t0

    rewards = np.vstack([s.rewards for s in steps])
    dones = [s.done for s in steps]

    losses = {"policy": 0.0, "critic": 0.0, "total": 0.0}
    actor_grads = [GradStore.zeros_like(a) for a in models.actors]
    critic_grads = [GradStore.zeros_like(c) for c in models.critics]
    comm_grads = []
    comm_bwd = 0.0

    for i in range(n):
        # The belief acted on at the last step is the final round's
        # output; use the recomputation there so its gradient reaches
        # the comm net (identical value, parameters unchanged so far).
        xs = np.ascontiguousarray(
            [
                np.concatenate(
                    [
                        steps[t].obs[i],
                        recomputed_last[i] if t == T - 1 else steps[t].beliefs[i],
                    ]
                )
                for t in range(T)
            ]
        )
        values, vcaches = mlp_forward(xs, models.critics[i], CRITIC_ACTS)
        # The bootstrap value is a constant of the loss (semi-gradient);
        # frozen_boot pins it externally for finite-difference checks.
        if frozen_boot is not None:
            boot = frozen_boot[i]
        elif steps[T - 1].done:
            boot = 0.0
        else:
            xb = np.concatenate([final_boot_obs[i], final_beliefs[i]]).reshape(1, -1)
            vb, _ = mlp_forward(xb, models.critics[i], CRITIC_ACTS)
            boot = float(vb[0, 0])
        returns = returns_with_resets(rewards[:, i], dones, gamma, boot)
        if frozen_advantages is None:
            adv = returns - values[:, 0]
        else:
            adv = frozen_advantages[:, i]

        logits, acaches = mlp_forward(xs, models.actors[i], ACTOR_ACTS)
        actions = np.array([s.actions[i] for s in steps])
        ploss, glogits = policy_loss_and_logit_grad(
            logits, actions, adv, entropy_coef
        )
        gx_actor, _ = mlp_backward(glogits, acaches, actor_grads[i])

        verr = values[:, 0] - returns
        closs = float((verr * verr).mean())
        gvalues = (2.0 * verr / T).reshape(-1, 1)
        gx_critic, _ = mlp_backward(gvalues, vcaches, critic_grads[i])

        losses["policy"] += ploss
        losses["critic"] += closs

        tb = clock()
        obs_w = len(steps[0].obs[i])
        gbelief_last = gx_actor[T - 1, obs_w:] + gx_critic[T - 1, obs_w:]
        enc_cache, gru_cache = last_belief_caches[i]
        genc, _, gru_grads = gru_cell_backward(
            np.ascontiguousarray(gbelief_last.reshape(1, -1)), gru_cache
        )
        _, enc_layer_grads = mlp_backward(genc, enc_cache)
        g = GradStore.zeros_like(models.comm_nets[i])
        g.add_layer(0, *enc_layer_grads[0])
        for k, l in enumerate(gru_grads.layers):
            g.add_layer(1 + k, l.weights, l.bias)
        comm_grads.append(g)
        comm_bwd += clock() - tb

    losses["total"] = losses["policy"] + losses["critic"]
    if recorder is not None:
        now = clock()
        recorder.stamp(COMMUNICATION, now - comm_fwd - comm_bwd, now)
    return losses["total"], losses, (actor_grads, critic_grads, comm_grads)


def _enc_store(comm_net):
    return ParamStore(comm_net.layers[:1])


def _gru_store(comm_net):
    return ParamStore(comm_net.layers[1:4])


def update(models, steps, env, final_beliefs, last_caches, gamma, entropy_coef, recorder=None):
    """Model-update phase: one Adam step per actor, critic and comm net."""
    t0 = clock()
    comm_before = recorder.times[COMMUNICATION] if recorder is not None else 0.0
    n = models.n_agents
    boot_obs = [env.observe(i) for i in range(n)]
    belief_mat = np.vstack([b.vector for b in final_beliefs])
    _, losses, (agrads, cgrads, mgrads) = loss_and_grads(
        models,
        steps,
        boot_obs,
        belief_mat,
        last_caches,
        gamma,
        entropy_coef,
        recorder,
    )
    for i in range(n):
        adam_step(models.actors[i], agrads[i], models.actor_opts[i])
        adam_step(models.critics[i], cgrads[i], models.critic_opts[i])
        adam_step(models.comm_nets[i], mgrads[i], models.comm_opts[i])
    t1 = clock()
    if recorder is not None:
        comm_delta = recorder.times[COMMUNICATION] - comm_before
        recorder.stamp(GRADIENT_UPDATE, t0, max(t0, t1 - comm_delta))
    return losses


def neurcomm_iteration(
    models,
    env,
    graph,
    beliefs,
    horizon,
    gamma,
    entropy_coef,
    rng,
    recorder=None,
    prev_probs=None,
    episode_returns=None,
    episode_accum=None,
):
    """One strictly sequential iteration: rollout then update. Returns
    (losses, beliefs, probs carry, t_sg, t_mu)."""
    t0 = clock()
    steps, beliefs, last_caches, probs = rollout(
        models,
        env,
        graph,
        beliefs,
        horizon,
        rng,
        recorder,
        prev_probs,
        episode_returns=episode_returns,
        episode_accum=episode_accum,
    )
    t1 = clock()
    losses = None
    if steps:
        losses = update(
            models, steps, env, beliefs, last_caches, gamma, entropy_coef, recorder
        )
    t2 = clock()
    return losses, beliefs, probs, t1 - t0, t2 - t1
