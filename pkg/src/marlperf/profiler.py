"""Category-stamped timing collection, breakdowns, IPS, and sweeps.

Recorders are per-thread append-free accumulators (five floats and a
byte counter); workers hand deltas to the orchestrator at iteration
boundaries, which merges them into TimingBreakdown rows. Multi-thread
category totals follow the CPU-time-sum convention (stacked-bar style);
wall-clock is kept separately for IPS.
"""

import math
import time
from dataclasses import dataclass, field, replace

from .errors import (
    DegenerateMeasurementError,
    TimingError,
    UndefinedBreakdownError,
)

POLICY_INFERENCE = 0
COMMUNICATION = 1
ENV_STEP = 2
GRADIENT_UPDATE = 3
BUFFER_OPS = 4

CATEGORIES = (
    "policy_inference",
    "communication",
    "env_step",
    "gradient_update",
    "buffer_ops",
)

EXECUTION_CATEGORIES = (POLICY_INFERENCE, COMMUNICATION, ENV_STEP)
TRAINING_CATEGORIES = (COMMUNICATION, GRADIENT_UPDATE, BUFFER_OPS)

clock = time.perf_counter


class Recorder:
    """Accumulates stamped spans for one thread.

    stamp() is safe to call concurrently only in the sense that distinct
    threads use distinct recorders; one recorder must not be shared.
    """

    __slots__ = ("times", "comm_bytes")

    enabled = True

    def __init__(self):
        self.times = [0.0, 0.0, 0.0, 0.0, 0.0]
        self.comm_bytes = 0

    def stamp(self, category, start, end):
        if end < start:
            raise TimingError(
                f"negative span for {CATEGORIES[category]}: {start} .. {end}"
            )
        self.times[category] += end - start

    def add_bytes(self, n):
        self.comm_bytes += n

    def take(self):
        """Return accumulated (times, bytes) and reset."""
        out = (self.times, self.comm_bytes)
        self.times = [0.0, 0.0, 0.0, 0.0, 0.0]
        self.comm_bytes = 0
        return out


class NoopRecorder(Recorder):
    """Stamp sink for --no-profile runs; keeps call sites intact."""

    enabled = False

    def stamp(self, category, start, end):
        pass

    def add_bytes(self, n):
        pass


@dataclass
class TimingBreakdown:
    """Per-iteration accumulated durations, split by phase.

    `sg` holds categories accumulated on rollout (execution) threads,
    `mu` those accumulated on the learner; `times` is their sum. t_sg
    and t_mu are the measured phase wall-clock latencies.
    """

    iteration: int
    warmup: bool
    times: list[float] = field(default_factory=lambda: [0.0] * 5)
    sg: list[float] = field(default_factory=lambda: [0.0] * 5)
    mu: list[float] = field(default_factory=lambda: [0.0] * 5)
    comm_bytes: int = 0
    t_sg: float = 0.0
    t_mu: float = 0.0
    wallclock: float = 0.0

    def add_sg(self, times, nbytes=0):
        for i, t in enumerate(times):
            self.sg[i] += t
            self.times[i] += t
        self.comm_bytes += nbytes

    def add_mu(self, times, nbytes=0):
        for i, t in enumerate(times):
            self.mu[i] += t
            self.times[i] += t
        self.comm_bytes += nbytes


def merge_thread_times(per_thread):
    """CPU-time-sum convention: category totals add across threads."""
    total = [0.0] * 5
    for times in per_thread:
        for i, t in enumerate(times):
            total[i] += t
    return total


def breakdown_pct(breakdown, phase_filter="all", times=None):
    """Percentage share per category over the filtered category set.

    phase_filter selects which categories count: execution uses
    {policy_inference, communication, env_step}, training uses
    {communication, gradient_update, buffer_ops}. By default percentages
    are computed over the breakdown's combined times; pass times= to
    rebase on a phase-specific accumulation (e.g. breakdown.sg).
    """
    if times is None:
        times = breakdown.times
    if phase_filter == "all":
        cats = tuple(range(5))
    elif phase_filter == "execution":
        cats = EXECUTION_CATEGORIES
    elif phase_filter == "training":
        cats = TRAINING_CATEGORIES
    else:
        raise ValueError(f"unknown phase filter {phase_filter!r}")
    total = sum(times[c] for c in cats)
    if total <= 0.0:
        raise UndefinedBreakdownError(
            f"cannot compute a {phase_filter} breakdown over zero total time"
        )
    return {CATEGORIES[c]: 100.0 * times[c] / total for c in cats}


def comm_percentages(breakdowns):
    """Communication share of execution-side and training-side time,
    aggregated over non-warmup iterations."""
    sg = merge_thread_times(b.sg for b in breakdowns if not b.warmup)
    mu = merge_thread_times(b.mu for b in breakdowns if not b.warmup)
    exe_total = sum(sg[c] for c in EXECUTION_CATEGORIES)
    trn_total = sum(mu[c] for c in TRAINING_CATEGORIES)
    pct_exe = 100.0 * sg[COMMUNICATION] / exe_total if exe_total > 0 else 0.0
    pct_trn = 100.0 * mu[COMMUNICATION] / trn_total if trn_total > 0 else 0.0
    return pct_exe, pct_trn


def compose_latency(t_sg, t_mu, mode):
    if mode == "on_policy":
        return t_sg + t_mu
    if mode == "off_policy":
        return max(t_sg, t_mu)
    raise ValueError(f"unknown composition mode {mode!r}")


@dataclass
class IPSReport:
    t_sg: float
    t_mu: float
    t_iteration: float
    ips: float
    comm_pct_execution: float
    comm_pct_training: float

    def to_dict(self):
        return {
            "t_sg_s": self.t_sg,
            "t_mu_s": self.t_mu,
            "t_iteration_s": self.t_iteration,
            "ips": self.ips,
            "comm_pct_execution": self.comm_pct_execution,
            "comm_pct_training": self.comm_pct_training,
        }


def compute_ips(t_sg, t_mu, mode):
    """IPS = 1 / (phase composition); sum for on-policy, max for
    overlapped off-policy execution."""
    if t_sg <= 0.0 or t_mu <= 0.0:
        raise DegenerateMeasurementError(
            f"non-positive phase durations t_sg={t_sg} t_mu={t_mu}"
        )
    t_iter = compose_latency(t_sg, t_mu, mode)
    return IPSReport(t_sg, t_mu, t_iter, 1.0 / t_iter, 0.0, 0.0)


def summarize(breakdowns, mode):
    """IPSReport over the non-warmup iterations of one run."""
    kept = [b for b in breakdowns if not b.warmup]
    if not kept:
        raise DegenerateMeasurementError("no non-warmup iterations to summarize")
    t_sg = sum(b.t_sg for b in kept) / len(kept)
    t_mu = sum(b.t_mu for b in kept) / len(kept)
    report = compute_ips(t_sg, t_mu, mode)
    pct_exe, pct_trn = comm_percentages(kept)
    return replace(report, comm_pct_execution=pct_exe, comm_pct_training=pct_trn)


def loglog_slope(xs, ys):
    """Least-squares slope of log(y) against log(x)."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need at least two points to fit a slope")
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    mx = sum(lx) / len(lx)
    my = sum(ly) / len(ly)
    sxx = sum((a - mx) ** 2 for a in lx)
    sxy = sum((a - mx) * (b - my) for a, b in zip(lx, ly))
    return sxy / sxx


@dataclass
class SweepReport:
    parameter: str
    values: list
    reports: list  # IPSReport per value
    breakdowns: list  # list of per-iteration TimingBreakdown per value

    def series(self, fieldname):
        return [getattr(r, fieldname) for r in self.reports]

    def slope(self, fieldname):
        return loglog_slope(self.values, self.series(fieldname))


def sweep(plan_template, parameter, values, config=None, driver_factory=None):
    """Run one configuration per value (identical seeds and iteration
    counts) and collect reports. All plans are validated before any
    value runs."""
    from . import runtime

    if parameter not in ("rollout_threads", "n_agents"):
        raise ValueError(f"unsupported sweep parameter {parameter!r}")
    if list(values) != sorted(set(values)) or len(values) < 1:
        raise ValueError("sweep values must be strictly increasing")
    plans = [replace(plan_template, **{parameter: v}) for v in values]
    for plan in plans:
        runtime.validate_plan(plan)
    reports, raw = [], []
    for plan in plans:
        breakdowns = runtime.run(plan, config, driver_factory=driver_factory)
        reports.append(summarize(breakdowns, runtime.composition_mode(plan)))
        raw.append(breakdowns)
    return SweepReport(parameter, list(values), reports, raw)
