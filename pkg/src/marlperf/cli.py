"""Experiment entry point: validate configs, run experiments or sweeps,
serialize reports.

Emitted files (schemas are fixed; the plotting component consumes them
bit-exactly):

breakdown.csv
    iteration, warmup, policy_inference_s, communication_s, env_step_s,
    gradient_update_s, buffer_ops_s, wallclock_s, comm_bytes
summary.json
    t_sg_s, t_mu_s, t_iteration_s, ips, comm_pct_execution,
    comm_pct_training, config_hash
sweep.csv
    parameter, value, t_sg_s, t_mu_s, t_iteration_s, ips,
    comm_pct_execution, comm_pct_training
"""

import argparse
import json
import sys
from pathlib import Path

from . import profiler, runtime
from .config import parse_config
from .errors import ConfigError

BREAKDOWN_HEADER = (
    "iteration,warmup,policy_inference_s,communication_s,env_step_s,"
    "gradient_update_s,buffer_ops_s,wallclock_s,comm_bytes"
)
SWEEP_HEADER = (
    "parameter,value,t_sg_s,t_mu_s,t_iteration_s,ips,"
    "comm_pct_execution,comm_pct_training"
)


def _prepare_output(directory, names, force):
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        target = out / name
        if target.exists() and not force:
            raise ConfigError(
                f"refusing to overwrite {target}; pass --force to allow it"
            )
    return out


def write_breakdown_csv(path, breakdowns):
    lines = [BREAKDOWN_HEADER]
    for b in breakdowns:
        cells = [str(b.iteration), str(int(b.warmup))]
        cells += [repr(t) for t in b.times]
        cells.append(repr(b.wallclock))
        cells.append(str(b.comm_bytes))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _check_percentages(d):
    for key in ("comm_pct_execution", "comm_pct_training"):
        if not 0.0 <= d[key] <= 100.0:
            raise ValueError(f"{key} out of range at emission: {d[key]}")


def write_summary_json(path, report, config_hash):
    payload = report.to_dict()
    _check_percentages(payload)
    payload["config_hash"] = config_hash
    path.write_text(json.dumps(payload, indent=2) + "\n")


def read_summary_json(path):
    data = json.loads(Path(path).read_text())
    config_hash = data.pop("config_hash")
    report = profiler.IPSReport(
        t_sg=data["t_sg_s"],
        t_mu=data["t_mu_s"],
        t_iteration=data["t_iteration_s"],
        ips=data["ips"],
        comm_pct_execution=data["comm_pct_execution"],
        comm_pct_training=data["comm_pct_training"],
    )
    return report, config_hash


def write_sweep_csv(path, sweep_report):
    lines = [SWEEP_HEADER]
    for value, report in zip(sweep_report.values, sweep_report.reports):
        cells = [sweep_report.parameter, str(value)]
        d = report.to_dict()
        _check_percentages(d)
        cells += [
            repr(d["t_sg_s"]),
            repr(d["t_mu_s"]),
            repr(d["t_iteration_s"]),
            repr(d["ips"]),
            repr(d["comm_pct_execution"]),
            repr(d["comm_pct_training"]),
        ]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def emit_reports(breakdowns, report, cfg, force=False, sweep_report=None):
    """Write the documented artifacts plus the effective-config echo.
    Returns the list of written paths."""
    names = ["effective_config.json"]
    if sweep_report is not None:
        names.append("sweep.csv")
    else:
        if "csv" in cfg.output.formats:
            names.append("breakdown.csv")
        if "json" in cfg.output.formats:
            names.append("summary.json")
    out = _prepare_output(cfg.output.directory, names, force)
    written = []
    echo = out / "effective_config.json"
    echo.write_text(json.dumps(cfg.effective_dict(), indent=2, sort_keys=True) + "\n")
    written.append(echo)
    if sweep_report is not None:
        path = out / "sweep.csv"
        write_sweep_csv(path, sweep_report)
        written.append(path)
        return written
    if "csv" in cfg.output.formats:
        path = out / "breakdown.csv"
        write_breakdown_csv(path, breakdowns)
        written.append(path)
    if "json" in cfg.output.formats:
        path = out / "summary.json"
        write_summary_json(path, report, cfg.config_hash())
        written.append(path)
    return written


def _load(args):
    cfg = parse_config(args.config)
    if args.output_dir is not None:
        cfg.output.directory = args.output_dir
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_validate(args):
    cfg = _load(args)
    plans = []
    if cfg.sweep is not None:
        from dataclasses import replace

        base = runtime.plan_from_config(cfg)
        for value in cfg.sweep.values:
            plans.append(replace(base, **{cfg.sweep.parameter: value}))
    else:
        plans.append(runtime.plan_from_config(cfg))
    for plan in plans:
        runtime.validate_plan(plan)
    print(f"config ok: {len(plans)} plan(s) validated")
    return 0


def cmd_run(args):
    cfg = _load(args)
    plan = runtime.validate_plan(runtime.plan_from_config(cfg))
    breakdowns = runtime.run(plan, cfg, profile=not args.no_profile)
    report = profiler.summarize(breakdowns, runtime.composition_mode(plan))
    written = emit_reports(breakdowns, report, cfg, force=args.force)
    print(f"ips={report.ips:.4f} t_iteration={report.t_iteration:.6f}s")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_sweep(args):
    cfg = _load(args)
    if cfg.sweep is None:
        raise ConfigError("config has no sweep section")
    plan = runtime.plan_from_config(cfg)
    sweep_report = profiler.sweep(plan, cfg.sweep.parameter, cfg.sweep.values, cfg)
    written = emit_reports(None, None, cfg, force=args.force, sweep_report=sweep_report)
    for value, report in zip(sweep_report.values, sweep_report.reports):
        print(f"{cfg.sweep.parameter}={value}: ips={report.ips:.4f}")
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="marlperf",
        description="latency-bounded throughput characterization of "
        "multi-agent RL training pipelines",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("sweep", cmd_sweep), ("validate", cmd_validate)):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a JSON experiment config")
        p.add_argument("--output-dir", default=None, help="override output directory")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--force", action="store_true", help="overwrite outputs")
        p.add_argument(
            "--no-profile",
            action="store_true",
            help="replace stamps with no-ops (overhead measurement)",
        )
        p.set_defaults(fn=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
