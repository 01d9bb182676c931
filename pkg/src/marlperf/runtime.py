"""Execution runtime: maps pipelines onto rollout workers and learners.

Overlapped pipelines (replay CTDE, learnt-graph CTDE) run free-running
rollout workers double-buffered against a single learner: workers
produce fragment k+1 with the parameters published before learner step
k, so content is deterministic while phases overlap. The networked
pipeline is strictly sequential on one thread. Phase latencies compose
per policy mode: sum when Model Update depends on fresh samples, max
when the phases overlap.
"""

import queue
import threading
import time
from dataclasses import dataclass

import numpy as np

from .config import Hyperparameters
from .envs import make_env
from .errors import ConfigError
from .pipelines import maddpg as maddpg_pipe
from .pipelines import neurcomm as neurcomm_pipe
from .pipelines import tom2c as tom2c_pipe
from .pipelines.common import OnPolicyBatch, ReplayBuffer
from .profiler import (
    COMMUNICATION,
    NoopRecorder,
    Recorder,
    TimingBreakdown,
    clock,
    compose_latency,
)

PIPELINE_MODES = {
    "maddpg": "off_policy",
    "tom2c": "on_policy",
    "neurcomm": "on_policy",
}

# Phase-latency composition: the replay pipeline overlaps by nature and
# the learnt-graph pipeline hides its actors behind the single training
# thread, so both compose as max; the networked pipeline is sequential.
PIPELINE_COMPOSITION = {
    "maddpg": "off_policy",
    "tom2c": "off_policy",
    "neurcomm": "on_policy",
}


@dataclass
class RunPlan:
    pipeline: str
    n_agents: int
    rollout_threads: int = 1
    training_threads: int = 1
    policy_mode: str | None = None
    iterations: int = 30
    warmup_iterations: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.policy_mode is None:
            self.policy_mode = PIPELINE_MODES.get(self.pipeline, "on_policy")


@dataclass
class PhaseLatencies:
    t_sg: float
    t_mu: float


def compose_iteration_latency(lat, mode):
    """Sum for on-policy phase dependency, max for overlapped phases."""
    return compose_latency(lat.t_sg, lat.t_mu, mode)


def validate_plan(plan):
    known = set(PIPELINE_MODES) | {"synthetic"}
    if plan.pipeline not in known:
        raise ConfigError(f"unknown pipeline {plan.pipeline!r}")
    if plan.n_agents < 1:
        raise ConfigError("n_agents must be at least 1")
    if plan.rollout_threads < 1 or plan.training_threads < 1:
        raise ConfigError("thread counts must be at least 1")
    if plan.iterations < 1:
        raise ConfigError("iterations must be at least 1")
    if not 0 <= plan.warmup_iterations < plan.iterations:
        raise ConfigError("warmup_iterations must be smaller than iterations")
    if plan.pipeline == "neurcomm" and (
        plan.rollout_threads != 1 or plan.training_threads != 1
    ):
        raise ConfigError(
            "the networked pipeline has no parallel setup: "
            "rollout_threads and training_threads must be 1"
        )
    if plan.pipeline == "tom2c" and plan.training_threads != 1:
        raise ConfigError(
            "the learnt-graph pipeline uses a single training thread"
        )
    if plan.pipeline in PIPELINE_MODES and plan.policy_mode != PIPELINE_MODES[plan.pipeline]:
        raise ConfigError(
            f"{plan.pipeline} is {PIPELINE_MODES[plan.pipeline]}, "
            f"got policy_mode={plan.policy_mode!r}"
        )
    return plan


def composition_mode(plan):
    if plan.pipeline in PIPELINE_COMPOSITION:
        return PIPELINE_COMPOSITION[plan.pipeline]
    return "off_policy" if plan.policy_mode == "off_policy" else "on_policy"


def plan_from_config(cfg, seed=None):
    return RunPlan(
        pipeline=cfg.pipeline,
        n_agents=cfg.n_agents,
        rollout_threads=cfg.rollout_threads,
        training_threads=cfg.training_threads,
        iterations=cfg.iterations,
        warmup_iterations=cfg.warmup_iterations,
        seed=cfg.seed if seed is None else seed,
    )


class RolloutWorker:
    """One thread owning a private sampling context. Tasks are
    (iteration, payload) pairs; the stop event is polled inside the
    sampling loop, so a stop lands within one environment step."""

    def __init__(self, worker_id, fn, sink):
        self.worker_id = worker_id
        self.fn = fn
        self.sink = sink
        self.tasks = queue.Queue()
        self.stop_event = threading.Event()
        self.thread = threading.Thread(
            target=self._loop, name=f"rollout-{worker_id}", daemon=True
        )

    def _loop(self):
        while True:
            task = self.tasks.get()
            if task is None:
                return
            iteration, payload = task
            try:
                t0 = clock()
                result = self.fn(self.worker_id, payload, self.stop_event)
                t1 = clock()
            except BaseException as exc:  # surfaced by the orchestrator
                self.sink.put((iteration, self.worker_id, exc, 0.0, 0.0))
                return
            self.sink.put((iteration, self.worker_id, result, t0, t1))

    def dispatch(self, iteration, payload):
        self.tasks.put((iteration, payload))

    def stop(self):
        self.stop_event.set()
        self.tasks.put(None)

    def join(self, timeout=None):
        self.thread.join(timeout)


def spawn_rollout_workers(count, fn, sink):
    if count < 1:
        raise ConfigError("need at least one rollout worker")
    workers = [RolloutWorker(i, fn, sink) for i in range(count)]
    for w in workers:
        w.thread.start()
    return workers


class _ListSink:
    __slots__ = ("items",)

    def __init__(self):
        self.items = []

    def insert(self, item):
        self.items.append(item)


class OverlappedDriver:
    """Double-buffered rollout/learn loop shared by the overlapped
    pipelines. Subclasses provide publish() (parameter snapshot for the
    workers), sample() (one fragment on a worker context) and train()."""

    def __init__(self, plan, hp, profile=True):
        self.plan = plan
        self.hp = hp
        self.profile = profile
        self.learner_recorder = Recorder() if profile else NoopRecorder()
        self.episode_returns = []
        self.worker_episode_returns = [[] for _ in range(plan.rollout_threads)]

    def _recorder(self):
        return Recorder() if self.profile else NoopRecorder()

    def publish(self):
        raise NotImplementedError

    def sample(self, worker_id, payload, stop_event):
        raise NotImplementedError

    def train(self, fragments, breakdown):
        raise NotImplementedError

    def run(self):
        plan = self.plan
        sink = queue.Queue()
        workers = spawn_rollout_workers(plan.rollout_threads, self.sample, sink)
        breakdowns = []
        try:
            payload = self.publish()
            for w in workers:
                w.dispatch(0, payload)
            prev_commit = clock()
            for k in range(plan.iterations):
                got = {}
                while len(got) < len(workers):
                    iteration, wid, result, t0, t1 = sink.get()
                    if isinstance(result, BaseException):
                        raise RuntimeError(
                            f"rollout worker {wid} failed"
                        ) from result
                    if iteration != k:
                        raise RuntimeError(
                            f"fragment for iteration {iteration} while "
                            f"collecting {k}"
                        )
                    got[wid] = (result, t0, t1)
                if k + 1 < plan.iterations:
                    payload = self.publish()
                    for w in workers:
                        w.dispatch(k + 1, payload)
                breakdown = TimingBreakdown(
                    iteration=k, warmup=k < plan.warmup_iterations
                )
                t_sg = 0.0
                fragments = []
                for wid in sorted(got):
                    result, t0, t1 = got[wid]
                    t_sg = max(t_sg, t1 - t0)
                    fragments.append(result)
                    times, nbytes = result["timing"]
                    breakdown.add_sg(times, nbytes)
                    self.worker_episode_returns[wid].extend(result["episodes"])
                    self.episode_returns.extend(result["episodes"])
                tmu0 = clock()
                self.train(fragments, breakdown)
                tmu1 = clock()
                times, nbytes = self.learner_recorder.take()
                breakdown.add_mu(times, nbytes)
                breakdown.t_sg = t_sg
                breakdown.t_mu = tmu1 - tmu0
                now = clock()
                breakdown.wallclock = now - prev_commit
                prev_commit = now
                breakdowns.append(breakdown)
        finally:
            for w in workers:
                w.stop()
            for w in workers:
                w.join(timeout=10.0)
        return breakdowns


class MaddpgDriver(OverlappedDriver):
    def __init__(self, plan, hp, env_factory, profile=True):
        super().__init__(plan, hp, profile)
        rng = np.random.default_rng(plan.seed)
        probe = env_factory(plan.seed)
        obs_widths = [probe.obs_width(i) for i in range(plan.n_agents)]
        n_actions = [probe.n_actions(i) for i in range(plan.n_agents)]
        self.models = maddpg_pipe.init_maddpg(
            obs_widths, n_actions, hp.hidden, hp.lr, rng
        )
        self.buffer = ReplayBuffer(hp.buffer_capacity)
        self.learner_rng = np.random.default_rng(plan.seed + 1_000_003)
        self.contexts = [
            {
                "env": env_factory(plan.seed + wid),
                "rng": np.random.default_rng(plan.seed + 7919 * (wid + 1)),
                "recorder": self._recorder(),
            }
            for wid in range(plan.rollout_threads)
        ]
        self.insert_count = 0

    def publish(self):
        return self.models.snapshot_policies()

    def sample(self, worker_id, policies, stop_event):
        ctx = self.contexts[worker_id]
        sink = _ListSink()
        episodes = []
        maddpg_pipe.maddpg_sample(
            policies,
            ctx["env"],
            sink,
            self.hp.rollout_steps,
            self.hp.epsilon,
            ctx["rng"],
            ctx["recorder"],
            stop_event,
            episodes,
        )
        return {
            "experiences": sink.items,
            "episodes": episodes,
            "timing": ctx["recorder"].take(),
        }

    def train(self, fragments, breakdown):
        t0 = clock()
        total = 0
        for fragment in fragments:
            self.buffer.insert_batch(fragment["experiences"])
            total += len(fragment["experiences"])
        self.insert_count += total
        t1 = clock()
        # Global-buffer insertion is part of the sample flow: stamp it
        # as execution-side communication.
        breakdown.sg[COMMUNICATION] += t1 - t0
        breakdown.times[COMMUNICATION] += t1 - t0
        steps = total // self.hp.batch
        for _ in range(steps):
            maddpg_pipe.maddpg_update(
                self.models,
                self.buffer,
                self.hp.batch,
                self.hp.gamma,
                self.hp.tau,
                self.learner_rng,
                self.learner_recorder,
            )


class Tom2cDriver(OverlappedDriver):
    def __init__(self, plan, hp, env_factory, profile=True):
        super().__init__(plan, hp, profile)
        rng = np.random.default_rng(plan.seed)
        probe = env_factory(plan.seed)
        widths = {probe.obs_width(i) for i in range(plan.n_agents)}
        if len(widths) != 1:
            raise ConfigError(
                "the learnt-graph pipeline batches agents as rows and "
                f"needs one observation width, got {sorted(widths)}"
            )
        self.models = tom2c_pipe.init_tom2c(
            plan.n_agents,
            widths.pop(),
            probe.n_actions(0),
            hp.hidden,
            hp.tom_dim,
            hp.lr,
            rng,
        )
        self.contexts = []
        for wid in range(plan.rollout_threads):
            clone = tom2c_pipe.init_tom2c(
                plan.n_agents,
                probe.obs_width(0),
                probe.n_actions(0),
                hp.hidden,
                hp.tom_dim,
                hp.lr,
                np.random.default_rng(0),
            )
            self.contexts.append(
                {
                    "env": env_factory(plan.seed + wid),
                    "rng": np.random.default_rng(plan.seed + 7919 * (wid + 1)),
                    "recorder": self._recorder(),
                    "models": clone,
                    "hidden": tom2c_pipe.zero_hidden(plan.n_agents, hp.tom_dim),
                    "accum": [0.0],
                }
            )

    def publish(self):
        return self.models.copy_params()

    def sample(self, worker_id, snapshot, stop_event):
        ctx = self.contexts[worker_id]
        ctx["models"].load_params(snapshot)
        episodes = []
        records, boot, hidden = tom2c_pipe.collect_segment(
            ctx["models"],
            ctx["env"],
            ctx["hidden"],
            self.hp.rollout_steps,
            self.hp.comm_threshold,
            ctx["rng"],
            ctx["recorder"],
            stop_event,
            episodes,
            ctx["accum"],
        )
        ctx["hidden"] = hidden
        return {
            "segment": (records, boot),
            "episodes": episodes,
            "timing": ctx["recorder"].take(),
        }

    def train(self, fragments, breakdown):
        segments = [f["segment"] for f in fragments if f["segment"][0]]
        if not segments:
            return
        batch = OnPolicyBatch(segments)
        tom2c_pipe.learner_update(
            self.models,
            batch,
            self.hp.gamma,
            self.hp.entropy_coef,
            self.hp.sparsity_coef,
            self.learner_recorder,
        )


class NeurcommDriver:
    """Strictly sequential: one thread runs both phases in turn."""

    def __init__(self, plan, hp, env_factory, profile=True):
        self.plan = plan
        self.hp = hp
        self.recorder = Recorder() if profile else NoopRecorder()
        rng = np.random.default_rng(plan.seed)
        self.env = env_factory(plan.seed)
        n = plan.n_agents
        self.graph = self.env.comm_graph()
        obs_widths = [self.env.obs_width(i) for i in range(n)]
        self.models = neurcomm_pipe.init_neurcomm(
            obs_widths,
            self.env.local_state(0).size,
            self.env.n_actions(0),
            hp.hidden,
            hp.belief_dim,
            hp.lr,
            rng,
        )
        self.rng = np.random.default_rng(plan.seed + 7919)
        self.beliefs = neurcomm_pipe.fresh_beliefs(n, hp.belief_dim)
        self.prev_probs = None
        self.episode_returns = []
        self.accum = [0.0]

    def run(self):
        breakdowns = []
        for k in range(self.plan.iterations):
            breakdown = TimingBreakdown(
                iteration=k, warmup=k < self.plan.warmup_iterations
            )
            w0 = clock()
            steps, self.beliefs, caches, self.prev_probs = neurcomm_pipe.rollout(
                self.models,
                self.env,
                self.graph,
                self.beliefs,
                self.hp.horizon,
                self.rng,
                self.recorder,
                self.prev_probs,
                episode_returns=self.episode_returns,
                episode_accum=self.accum,
            )
            w1 = clock()
            times, nbytes = self.recorder.take()
            breakdown.add_sg(times, nbytes)
            if steps:
                neurcomm_pipe.update(
                    self.models,
                    steps,
                    self.env,
                    self.beliefs,
                    caches,
                    self.hp.gamma,
                    self.hp.entropy_coef,
                    self.recorder,
                )
            w2 = clock()
            times, nbytes = self.recorder.take()
            breakdown.add_mu(times, nbytes)
            breakdown.t_sg = w1 - w0
            breakdown.t_mu = w2 - w1
            breakdown.wallclock = w2 - w0
            breakdowns.append(breakdown)
        return breakdowns


@dataclass
class SyntheticSpec:
    """Fixed or plan-dependent phase durations for harness testing."""

    sample_time: object  # float or callable(plan) -> float
    update_time: object
    overlapped: bool = False

    def resolve(self, plan):
        ts = self.sample_time(plan) if callable(self.sample_time) else self.sample_time
        tu = self.update_time(plan) if callable(self.update_time) else self.update_time
        return ts, tu


class SyntheticDriver:
    """Sleep-based phases for calibrating the harness itself."""

    def __init__(self, plan, spec, profile=True):
        self.plan = plan
        self.spec = spec
        self.profile = profile
        self.episode_returns = []

    def run(self):
        ts, tu = self.spec.resolve(self.plan)
        if self.spec.overlapped:
            return self._run_overlapped(ts, tu)
        breakdowns = []
        for k in range(self.plan.iterations):
            breakdown = TimingBreakdown(
                iteration=k, warmup=k < self.plan.warmup_iterations
            )
            w0 = clock()
            time.sleep(ts)
            w1 = clock()
            time.sleep(tu)
            w2 = clock()
            breakdown.add_sg([0.0, 0.0, w1 - w0, 0.0, 0.0])
            breakdown.add_mu([0.0, 0.0, 0.0, w2 - w1, 0.0])
            breakdown.t_sg = w1 - w0
            breakdown.t_mu = w2 - w1
            breakdown.wallclock = w2 - w0
            breakdowns.append(breakdown)
        return breakdowns

    def _run_overlapped(self, ts, tu):
        driver = _SyntheticOverlapped(self.plan, Hyperparameters(), self.profile, ts, tu)
        return driver.run()


class _SyntheticOverlapped(OverlappedDriver):
    def __init__(self, plan, hp, profile, ts, tu):
        super().__init__(plan, hp, profile)
        self.ts = ts
        self.tu = tu

    def publish(self):
        return None

    def sample(self, worker_id, payload, stop_event):
        t0 = clock()
        time.sleep(self.ts)
        rec = Recorder()
        rec.stamp(2, t0, clock())  # env_step stand-in
        return {"episodes": [], "timing": rec.take()}

    def train(self, fragments, breakdown):
        t0 = clock()
        time.sleep(self.tu)
        self.learner_recorder.stamp(3, t0, clock())


def default_driver_factory(plan, config, profile=True):
    hp = config.hyperparameters if config is not None else Hyperparameters()

    def env_factory(seed):
        name = config.environment if config is not None else (
            "networked" if plan.pipeline == "neurcomm" else "coopnav"
        )
        kwargs = {"limit": hp.episode_limit}
        if name == "networked":
            kwargs["topology"] = config.topology if config is not None else "ring"
            kwargs["inflow_rate"] = hp.inflow_rate
        return make_env(name, plan.n_agents, seed, **kwargs)

    if plan.pipeline == "maddpg":
        return MaddpgDriver(plan, hp, env_factory, profile)
    if plan.pipeline == "tom2c":
        return Tom2cDriver(plan, hp, env_factory, profile)
    if plan.pipeline == "neurcomm":
        return NeurcommDriver(plan, hp, env_factory, profile)
    raise ConfigError(
        f"pipeline {plan.pipeline!r} needs an explicit driver factory"
    )


def run(plan, config=None, driver_factory=None, profile=True):
    """Execute a validated plan; returns per-iteration TimingBreakdowns
    with the first warmup_iterations flagged as warmup."""
    validate_plan(plan)
    factory = driver_factory or default_driver_factory
    driver = factory(plan, config, profile)
    return driver.run()
