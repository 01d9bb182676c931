"""marlperf: speed-performance characterization of multi-agent RL training.

Three reference pipelines (replay-buffer CTDE, learnt-graph CTDE,
networked decentralized) run against desk-scale environments with every
phase of the training loop instrumented; reports cover per-category time
breakdowns, iterations-per-second, and scaling sweeps.
"""

__version__ = "0.1.0"
