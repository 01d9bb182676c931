"""Miniature pipeline-loss instances for finite-difference checking.

Instances are randomized but curated: any instance whose gradient vector
contains tiny-but-nonzero entries is rejected, because central
differences cannot resolve those coordinates (the comparison is
uninformative there, not wrong). Exactly-zero gradients are fine: a
dead path differentiates to an exact zero on both sides.
"""

import numpy as np

from marlperf import comm as comms
from marlperf.envs import Networked
from marlperf.numerics import ParamStore
from marlperf.pipelines import maddpg as M
from marlperf.pipelines import neurcomm as N
from marlperf.pipelines import tom2c as T

DEAD_ZONE_FLOOR = 5e-6


def well_conditioned(fn, params, floor=DEAD_ZONE_FLOOR):
    _, g = fn(params)
    nonzero = np.abs(g[np.abs(g) > 0])
    return nonzero.size == 0 or nonzero.min() >= floor


def _randomize(stores, rng):
    for ps in stores:
        for l in ps.layers:
            l.weights[...] = rng.uniform(-0.9, 0.9, l.weights.shape)
            l.bias[...] = rng.uniform(-0.3, 0.3, l.bias.shape)


def tom2c_instance(seed, n=2, steps=2, hidden=3, tom_dim=2, obs_w=4, acts=3):
    rng = np.random.default_rng(seed)
    models = T.init_tom2c(n, obs_w, acts, hidden, tom_dim, lr=1e-3, rng=rng)
    _randomize(models.parts().values(), rng)
    records = []
    for _ in range(steps):
        edges = rng.random((n, n)) < 0.7
        np.fill_diagonal(edges, False)
        records.append(
            T.StepRecord(
                obs=rng.uniform(-1, 1, (n, obs_w)),
                hidden_in=rng.uniform(-0.8, 0.8, (n * (n - 1), tom_dim)),
                edges=edges,
                actions=rng.integers(acts, size=n),
                rewards=rng.uniform(-1, 1, n),
                done=False,
                log_probs=np.zeros(n),
                values=np.zeros(n),
            )
        )
    segments = [(records, rng.uniform(-1, 1, n))]
    adv = rng.uniform(0.5, 1.5, (steps, n)) * rng.choice([-1.0, 1.0], (steps, n))
    names = ["encoder", "tom", "sender", "decision", "critic"]
    combined = ParamStore(sum([models.parts()[k].layers for k in names], []))

    def floss(params):
        total, _, grads = T.loss_and_grads(
            models, segments, 0.9, 0.05, 1e-2, frozen_advantages=adv
        )
        return total, np.concatenate([grads[k].flat() for k in names])

    return floss, combined


def neurcomm_instance(seed, n=2, horizon=2, hidden=3, belief=2):
    rng = np.random.default_rng(seed)
    env = Networked(n, seed=seed, topology="ring", limit=1000)
    models = N.init_neurcomm(
        [env.obs_width(i) for i in range(n)], 1, env.n_actions(0),
        hidden, belief, 1e-3, rng,
    )
    _randomize(models.actors + models.critics + models.comm_nets, rng)
    graph = env.comm_graph()
    beliefs = [comms.Belief(rng.uniform(-0.5, 0.5, belief), i, 0) for i in range(n)]
    steps, beliefs, caches, _ = N.rollout(models, env, graph, beliefs, horizon, rng)
    boot_obs = [env.observe(i) for i in range(n)]
    belief_mat = np.vstack([b.vector for b in beliefs])
    frozen_boot = [float(rng.uniform(-0.5, 0.5)) for _ in range(n)]
    adv = rng.uniform(0.5, 1.5, (horizon, n)) * rng.choice([-1.0, 1.0], (horizon, n))
    stores = models.actors + models.critics + models.comm_nets
    combined = ParamStore(sum([s.layers for s in stores], []))

    def floss(params):
        total, _, (ag, cg, mg) = N.loss_and_grads(
            models, steps, boot_obs, belief_mat, caches, 0.9, 0.05,
            frozen_advantages=adv, frozen_boot=frozen_boot,
        )
        return total, np.concatenate([g.flat() for g in ag + cg + mg])

    return floss, combined


def maddpg_instance(seed, n=2, batch=5, hidden=4, obs_w=4, acts=3):
    rng = np.random.default_rng(seed)
    models = M.init_maddpg([obs_w] * n, [acts] * n, hidden, 1e-3, rng)
    _randomize(
        models.policies + models.values + models.target_policies + models.target_values,
        rng,
    )
    obs_cols = [rng.uniform(-1, 1, (batch, obs_w)) for _ in range(n)]
    next_cols = [rng.uniform(-1, 1, (batch, obs_w)) for _ in range(n)]
    actions = rng.integers(acts, size=(batch, n))
    rewards = rng.uniform(-1, 1, (batch, n))

    def critic_scalar(params):
        losses, vgrads, _ = M.loss_and_grads(
            models, obs_cols, next_cols, actions, rewards, 0.9
        )
        return sum(l["critic"] for l in losses), np.concatenate(
            [g.flat() for g in vgrads]
        )

    def actor_scalar(params):
        losses, _, pgrads = M.loss_and_grads(
            models, obs_cols, next_cols, actions, rewards, 0.9
        )
        return sum(l["actor"] for l in losses), np.concatenate(
            [g.flat() for g in pgrads]
        )

    values = ParamStore(sum([v.layers for v in models.values], []))
    policies = ParamStore(sum([p.layers for p in models.policies], []))
    return (critic_scalar, values), (actor_scalar, policies)
