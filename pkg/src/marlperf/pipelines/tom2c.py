"""On-policy CTDE pipeline with learnt graph communication.

Acting runs five models per step: a dense observation encoder shared by
all agents, a recurrent pairwise intention net, a GNN edge scorer that
decides the directed communication graph, per-edge message delivery,
and a decision head over [own encoding || mean inbox payload]. A
centralized critic over the concatenated encodings provides values.
Parameters are shared across agents and applied batched (agents as
rows); intention inference, edge scoring and message movement are
stamped Communication both when acting and when the learner recomputes
them.
"""

from dataclasses import dataclass

import numpy as np

from .. import comm as comms
from ..numerics import (
    GradStore,
    OptimizerState,
    adam_step,
    dense_backward,
    dense_forward,
    gru_cell_backward,
    gru_cell_forward,
    init_mlp,
)
from ..numerics.backend import impl
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

DECISION_ACTS = ("relu", "identity")
CRITIC_ACTS = ("relu", "identity")


@dataclass
class Tom2cModels:
    encoder: object  # obs_w -> hidden, tanh
    tom: object  # pair GRU (2*hidden -> tom_dim) + 2-layer head -> 1 logit
    sender: object  # graph layer + edge scorer
    decision: object  # [hidden + (n-1)] -> hidden -> n_actions
    critic: object  # n*hidden -> hidden -> n (one value per agent)
    opts: dict
    n_agents: int
    hidden: int
    tom_dim: int
    n_actions: int

    def parts(self):
        return {
            "encoder": self.encoder,
            "tom": self.tom,
            "sender": self.sender,
            "decision": self.decision,
            "critic": self.critic,
        }

    def copy_params(self):
        return {k: v.copy() for k, v in self.parts().items()}

    def load_params(self, snapshot):
        for k, v in self.parts().items():
            for mine, theirs in zip(v.layers, snapshot[k].layers):
                mine.weights[...] = theirs.weights
                mine.bias[...] = theirs.bias


def init_tom2c(n_agents, obs_width, n_actions, hidden, tom_dim, lr, rng):
    from ..numerics.store import ParamStore, init_dense_layer, init_gru

    payload_w = max(n_agents - 1, 0)
    encoder = init_mlp((obs_width, hidden), rng)
    gru = init_gru(2 * hidden, tom_dim, rng)
    tom = ParamStore(
        gru.layers
        + [
            init_dense_layer(tom_dim, tom_dim, rng),
            init_dense_layer(tom_dim, 1, rng),
        ]
    )
    sender = ParamStore(
        [
            init_dense_layer(hidden + payload_w, tom_dim, rng, "graph-score"),
            init_dense_layer(2 * tom_dim, 1, rng, "graph-score"),
        ]
    )
    decision = init_mlp((hidden + payload_w, hidden, n_actions), rng)
    critic = init_mlp((n_agents * hidden, hidden, n_agents), rng)
    models = Tom2cModels(
        encoder=encoder,
        tom=tom,
        sender=sender,
        decision=decision,
        critic=critic,
        opts={},
        n_agents=n_agents,
        hidden=hidden,
        tom_dim=tom_dim,
        n_actions=n_actions,
    )
    models.opts = {k: OptimizerState(v, lr=lr) for k, v in models.parts().items()}
    return models


def zero_hidden(n_agents, tom_dim):
    return np.zeros((n_agents * max(n_agents - 1, 0), tom_dim))


@dataclass
class StepRecord:
    obs: np.ndarray  # (n, obs_w)
    hidden_in: np.ndarray  # (n*(n-1), tom_dim)
    edges: np.ndarray  # (n, n) bool, the graph actually used
    actions: np.ndarray  # (n,)
    rewards: np.ndarray  # (n,)
    done: bool
    log_probs: np.ndarray  # (n,)
    values: np.ndarray  # (n,)


def actor_step(models, env, hidden, threshold, rng, recorder=None):
    """One environment step through the full acting pipeline. Returns
    (StepRecord, next pair hidden)."""
    n = models.n_agents
    t0 = clock()
    obs = np.ascontiguousarray(env.observe_all())
    t1 = clock()
    enc, _ = dense_forward(obs, models.encoder.layers[0], "tanh")
    t2 = clock()
    if recorder is not None:
        recorder.stamp(ENV_STEP, t0, t1)
        recorder.stamp(POLICY_INFERENCE, t1, t2)
    intents, hidden_next, _ = comms.tom_infer(enc, hidden, models.tom, recorder)
    graph = comms.message_sender(intents, enc, models.sender, threshold, recorder)
    inboxes = comms.propagate(graph, lambda s: intents[s], recorder)
    t3 = clock()
    payload = comms.inbox_means(inboxes, max(n - 1, 0))
    t4 = clock()
    if recorder is not None:
        recorder.stamp(COMMUNICATION, t3, t4)
    dec_in = np.ascontiguousarray(np.hstack([enc, payload]))
    logits, _ = mlp_forward(dec_in, models.decision, DECISION_ACTS)
    probs = impl.softmax_rows(np.ascontiguousarray(logits))
    actions = sample_categorical(probs, rng)
    logp = np.log(np.clip(probs[np.arange(n), actions], 1e-300, None))
    values, _ = mlp_forward(enc.reshape(1, -1), models.critic, CRITIC_ACTS)
    t5 = clock()
    if recorder is not None:
        recorder.stamp(POLICY_INFERENCE, t4, t5)
    rewards, done = env.step(actions)
    t6 = clock()
    if recorder is not None:
        recorder.stamp(ENV_STEP, t5, t6)
    record = StepRecord(
        obs=obs,
        hidden_in=hidden.copy(),
        edges=graph.edges.copy(),
        actions=actions,
        rewards=rewards.copy(),
        done=done,
        log_probs=logp,
        values=values[0].copy(),
    )
    return record, hidden_next


def bootstrap_value(models, env):
    obs = np.ascontiguousarray(env.observe_all())
    enc, _ = dense_forward(obs, models.encoder.layers[0], "tanh")
    values, _ = mlp_forward(enc.reshape(1, -1), models.critic, CRITIC_ACTS)
    return values[0].copy()


def collect_segment(
    models,
    env,
    hidden,
    steps,
    threshold,
    rng,
    recorder=None,
    stop_event=None,
    episode_returns=None,
    episode_accum=None,
):
    """Collect one on-policy segment of `steps` records."""
    records = []
    acc = episode_accum if episode_accum is not None else [0.0]
    for _ in range(steps):
        if stop_event is not None and stop_event.is_set():
            break
        record, hidden = actor_step(models, env, hidden, threshold, rng, recorder)
        records.append(record)
        acc[0] += float(record.rewards.mean())
        if record.done:
            if episode_returns is not None:
                episode_returns.append(acc[0])
            acc[0] = 0.0
            env.reset_episode()
            hidden = zero_hidden(models.n_agents, models.tom_dim)
    boot = bootstrap_value(models, env)
    return records, boot, hidden


def _pair_indices(n, total_steps):
    """Global row indices of the (observer, other) halves of every pair,
    over all steps: pair row (t, i, j) reads enc rows t*n+i and t*n+j."""
    li = [i for i in range(n) for j in range(n) if j != i]
    ri = [j for i in range(n) for j in range(n) if j != i]
    base = np.repeat(np.arange(total_steps) * n, n * (n - 1))
    return base + np.tile(li, total_steps), base + np.tile(ri, total_steps)


def _complete_mean(x, n):
    """Mean over the other n-1 rows within each step block."""
    blocks = x.reshape(-1, n, x.shape[1])
    return ((blocks.sum(axis=1, keepdims=True) - blocks) / max(n - 1, 1)).reshape(
        x.shape
    )


def loss_and_grads(
    models,
    segments,
    gamma,
    entropy_coef,
    sparsity_coef,
    recorder=None,
    frozen_advantages=None,
):
    """Total learner loss and exact per-model gradients.

    The forward passes are recomputed from the recorded observations,
    pair hidden states (held constant: single-step truncation) and the
    recorded graphs (the threshold decision is not differentiated;
    scores enter the loss only through the sparsity penalty). Because
    hidden states are recorded, the intention net, edge scorer and
    payload pooling batch over all steps at once. Advantages are
    constants of the loss; frozen_advantages pins them externally for
    gradient checking.
    """
    n = models.n_agents
    hidden_w = models.hidden
    payload_w = max(n - 1, 0)
    flat_records = [r for steps, _ in segments for r in steps]
    total_steps = len(flat_records)

    all_obs = np.ascontiguousarray(np.vstack([r.obs for r in flat_records]))
    enc_all, enc_cache = dense_forward(all_obs, models.encoder.layers[0], "tanh")

    comm_t = 0.0
    tc = clock()
    if payload_w:
        left, right = _pair_indices(n, total_steps)
        pair_x = np.ascontiguousarray(
            np.hstack([enc_all[left], enc_all[right]])
        )
        hidden_in = np.ascontiguousarray(
            np.vstack([r.hidden_in for r in flat_records])
        )
        h_pairs, gru_cache = gru_cell_forward(pair_x, hidden_in, models.tom.view(0, 3))
        y1, tom_c1 = dense_forward(h_pairs, models.tom.layers[3], "relu")
        logits_pair, tom_c2 = dense_forward(y1, models.tom.layers[4], "identity")
        intents_rows = logits_pair.reshape(total_steps * n, payload_w)

        feats = np.ascontiguousarray(np.hstack([enc_all, intents_rows]))
        agg = np.ascontiguousarray(_complete_mean(feats, n))
        emb, agg_cache = dense_forward(agg, models.sender.layers[0], "tanh")
        pair_e = np.ascontiguousarray(np.hstack([emb[left], emb[right]]))
        scores, score_cache = dense_forward(pair_e, models.sender.layers[1], "sigmoid")

        adj_stack = np.ascontiguousarray(
            [r.edges for r in flat_records], dtype=np.float64
        )
        indeg = np.maximum(adj_stack.sum(axis=1), 1.0)  # (T, n)
        intents_3d = intents_rows.reshape(total_steps, n, payload_w)
        payload_all = (
            np.einsum("tji,tjf->tif", adj_stack, intents_3d) / indeg[:, :, None]
        ).reshape(total_steps * n, payload_w)
    comm_t += clock() - tc

    dec_in = np.ascontiguousarray(
        np.hstack([enc_all, payload_all]) if payload_w else enc_all
    )
    logits, dec_caches = mlp_forward(dec_in, models.decision, DECISION_ACTS)
    values, critic_caches = mlp_forward(
        np.ascontiguousarray(enc_all.reshape(total_steps, n * hidden_w)),
        models.critic,
        CRITIC_ACTS,
    )

    returns = np.vstack(
        [
            returns_with_resets(
                np.vstack([r.rewards for r in steps]),
                [r.done for r in steps],
                gamma,
                boot,
            )
            for steps, boot in segments
        ]
    )
    if frozen_advantages is None:
        advantages = returns - values
    else:
        advantages = frozen_advantages

    actions = np.concatenate([r.actions for r in flat_records])
    policy_loss, glogits = policy_loss_and_logit_grad(
        logits, actions, advantages.ravel(), entropy_coef
    )

    err = values - returns
    critic_loss = float((err * err).mean())
    gvalues = 2.0 * err / err.size

    if payload_w:
        sparsity_loss = sparsity_coef * float(scores.mean())
        gscores = np.full_like(scores, sparsity_coef / scores.size)
    else:
        sparsity_loss = 0.0

    grads = {k: GradStore.zeros_like(v) for k, v in models.parts().items()}
    genc_all = np.zeros_like(enc_all)

    gdec_in, _ = mlp_backward(glogits, dec_caches, grads["decision"])
    genc_all += gdec_in[:, :hidden_w]

    gcritic_in, _ = mlp_backward(gvalues, critic_caches, grads["critic"])
    genc_all += gcritic_in.reshape(total_steps * n, hidden_w)

    tc = clock()
    if payload_w:
        # payload path: decision gradient back through the recorded graph
        gpay_3d = (gdec_in[:, hidden_w:].reshape(total_steps, n, payload_w)) / indeg[
            :, :, None
        ]
        gintents_rows = np.einsum("tji,tif->tjf", adj_stack, gpay_3d).reshape(
            total_steps * n, payload_w
        )

        # sparsity path: scorer -> pair embeddings -> GNN -> features
        gpair_e, (gw, gb) = dense_backward(gscores, score_cache)
        grads["sender"].add_layer(1, gw, gb)
        d = gpair_e.shape[1] // 2
        gemb = np.zeros_like(emb)
        np.add.at(gemb, left, gpair_e[:, :d])
        np.add.at(gemb, right, gpair_e[:, d:])
        gagg, (gw, gb) = dense_backward(gemb, agg_cache)
        grads["sender"].add_layer(0, gw, gb)
        gfeats = _complete_mean(gagg, n) if n > 1 else np.zeros_like(gagg)
        genc_all += gfeats[:, :hidden_w]
        gintents_rows = gintents_rows + gfeats[:, hidden_w:]

        # intention net: head then the pair GRU, hidden inputs frozen
        gpair_logits = np.ascontiguousarray(
            gintents_rows.reshape(total_steps * n * payload_w, 1)
        )
        gy1, (gw, gb) = dense_backward(gpair_logits, tom_c2)
        grads["tom"].add_layer(4, gw, gb)
        gh_pairs, (gw, gb) = dense_backward(gy1, tom_c1)
        grads["tom"].add_layer(3, gw, gb)
        gpair_x, _, gru_grads = gru_cell_backward(gh_pairs, gru_cache)
        for i, l in enumerate(gru_grads.layers):
            grads["tom"].add_layer(i, l.weights, l.bias)
        h2 = gpair_x.shape[1] // 2
        np.add.at(genc_all, left, gpair_x[:, :h2])
        np.add.at(genc_all, right, gpair_x[:, h2:])
    comm_t += clock() - tc
    if recorder is not None:
        now = clock()
        recorder.stamp(COMMUNICATION, now - comm_t, now)

    _, (gw, gb) = dense_backward(np.ascontiguousarray(genc_all), enc_cache)
    grads["encoder"].add_layer(0, gw, gb)

    total = policy_loss + critic_loss + sparsity_loss
    losses = {
        "policy": float(policy_loss),
        "critic": critic_loss,
        "sparsity": float(sparsity_loss),
        "total": float(total),
    }
    return total, losses, grads


def learner_update(
    models, batch, gamma, entropy_coef, sparsity_coef, recorder=None
):
    """Consume one on-policy batch: advantage actor-critic losses for
    the decision head, sparsity-regularized sender, intention net,
    encoder and shared critic, one Adam step per model."""
    batch.consume()
    t0 = clock()
    comm_before = recorder.times[COMMUNICATION] if recorder is not None else 0.0
    _, losses, grads = loss_and_grads(
        models, batch.segments, gamma, entropy_coef, sparsity_coef, recorder
    )
    for name, params in models.parts().items():
        adam_step(params, grads[name], models.opts[name])
    t1 = clock()
    if recorder is not None:
        comm_delta = recorder.times[COMMUNICATION] - comm_before
        recorder.stamp(GRADIENT_UPDATE, t0, max(t0, t1 - comm_delta))
    return losses
