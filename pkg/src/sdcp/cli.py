"""Command-line experiment runner.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

from sdcp.config import format_duration, parse_config, parse_duration
from sdcp.engine import ConfigError, optimal_allocation, run_replications
from sdcp.oracle import uniform_allocation
from sdcp.schedules import ScheduleConfig, ScheduleKind
from sdcp.workload import OnOffModel

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
SCENARIOS = ("run", "stepsize-compare", "slot-sweep", "churn")
DAY = 86400.0

SUMMARY_HEADER = ["scenario", "schedule", "T_s", "tau", "replications",
                  "mean_miss_ratio", "ci_low", "ci_high", "mean_error"]


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    config_path: str
    out_dir: Path
    run_id: str


def _g(x):
    return f"{x:.12g}"


def trace_header(P):
    cols = ["k", "sim_time_s"]
    for name in ("theta", "theta_plus", "theta_minus", "y_plus", "y_minus"):
        cols += [f"{name}_{i}" for i in range(1, P + 1)]
    return cols + ["a_k", "miss_ratio", "error"]


def trace_rows(trace):
    for r in trace.records:
        yield ([str(r.k), _g(r.sim_time)]
               + [_g(x) for x in r.theta]
               + [str(int(x)) for x in r.theta_plus]
               + [str(int(x)) for x in r.theta_minus]
               + [_g(x) for x in r.y_plus]
               + [_g(x) for x in r.y_minus]
               + [_g(r.a_k), _g(r.miss_ratio), _g(r.error)])


def emit_trace_csv(trace, path):
    """Write one row per slot, 12 significant digits, LF line endings."""
    if not trace.records:
        raise ValueError("empty trace")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(trace.P))
        w.writerows(trace_rows(trace))


def _write_summary(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerows(rows)


def _variants(scenario, cfg, flags):
    """Yield ``(label, cfg, alloc)``; ``alloc`` is None for the algorithm."""
    if scenario == "run":
        yield cfg.schedule.kind.value, cfg, None
        yield from _baselines(cfg)
    elif scenario == "stepsize-compare":
        for kind in ScheduleKind:
            yield kind.value, replace(cfg, schedule=replace(cfg.schedule, kind=kind)), None
        yield from _baselines(cfg)
    elif scenario == "slot-sweep":
        for T in flags.T_list or (1.0, 10.0, 100.0):
            c = _with_slot_length(cfg, T)
            for kind in ScheduleKind:
                yield kind.value, replace(c, schedule=replace(c.schedule, kind=kind)), None
            yield from _baselines(c)
    elif scenario == "churn":
        if cfg.nonstationary is None:
            cfg = replace(cfg, nonstationary=OnOffModel(DAY, 9 * DAY, cfg.total_rate))
        taus = flags.tau_list or (3 * 3600.0, DAY, math.inf)
        for tau in taus:
            sched = replace(cfg.schedule, kind=ScheduleKind.CONDITIONAL,
                            reinit_period=None if math.isinf(tau) else tau)
            yield f"conditional({format_duration(tau)})", replace(cfg, schedule=sched), None
        yield "unif", cfg, uniform_allocation(cfg.P, cfg.K)
    else:
        raise ConfigError("scenario", f"unknown scenario {scenario!r}")


def _baselines(cfg):
    yield "opt", cfg, optimal_allocation(cfg)
    yield "unif", cfg, uniform_allocation(cfg.P, cfg.K)


def _with_slot_length(cfg, T):
    s = cfg.schedule
    sched = ScheduleConfig.for_slot_length(
        T, kind=s.kind, nu=s.nu, b_ratio=s.b_ratio, reinit_period=s.reinit_period,
        bootstrap=s.k_bs * cfg.T, adaptive=s.M * cfg.T)
    return replace(cfg, T=T, schedule=sched)


def run_scenario(manifest, cfg, flags):
    """Run every variant of the scenario and write trace CSVs plus ``summary.csv``."""
    out = manifest.out_dir
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for label, c, alloc in _variants(manifest.scenario, cfg, flags):
        traces, agg = run_replications(c, alloc=alloc, label=label, jobs=flags.jobs)
        tag = label.replace("(", "_").replace(")", "")
        for tr in traces:
            emit_trace_csv(tr, out / f"{manifest.scenario}__{tag}__T{_g(c.T)}__seed{tr.seed}.csv")
        if alloc is None:
            tau = format_duration(c.schedule.reinit_period or math.inf)
        else:
            tau = ""
        errors = [tr.mean_error() for tr in traces]
        rows.append([manifest.scenario, label, _g(c.T),
                     tau, str(len(traces)),
                     _g(agg.mean), _g(agg.ci_low), _g(agg.ci_high),
                     _g(sum(errors) / len(errors))])
        print(f"{label:>22s} T={_g(c.T):>5s}s  miss ratio {agg.mean:.4f} "
              f"[{agg.ci_low:.4f}, {agg.ci_high:.4f}]", file=sys.stderr)
    _write_summary(rows, out / "summary.csv")
    with open(out / "manifest.txt", "w", encoding="utf-8") as fh:
        fh.write(f"run_id={manifest.run_id}\nscenario={manifest.scenario}\n"
                 f"config={manifest.config_path}\n")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("arguments", message)


def build_parser():
    p = _Parser(prog="sdcp", description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--scenario", default="run", choices=SCENARIOS)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, help="base seed (beats SDCP_SEED and the file)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallel replications")
    p.add_argument("--replications", type=int)
    p.add_argument("--T", help="slot length, or a comma list for slot-sweep")
    p.add_argument("--K", type=int, help="cache size in slots")
    p.add_argument("--lambda", dest="rate", type=float, help="total request rate")
    p.add_argument("--tau", help="comma list of reinit periods for churn, e.g. 3h,1d,inf")
    return p


def _durations(text):
    return tuple(parse_duration(x) for x in text.split(","))


def main(argv=None):
    try:
        flags = build_parser().parse_args(argv)
        overrides = {}
        seed = os.environ.get("SDCP_SEED")
        if flags.seed is not None:
            seed = flags.seed
        if seed is not None:
            overrides["seed"] = seed
        if flags.replications is not None:
            overrides["replications"] = flags.replications
        if flags.K is not None:
            overrides["K"] = flags.K
        if flags.rate is not None:
            overrides["total_rate"] = flags.rate
        flags.T_list = None
        if flags.T is not None:
            Ts = _durations(flags.T)
            if flags.scenario == "slot-sweep":
                flags.T_list = Ts
            elif len(Ts) == 1:
                overrides["T"] = flags.T
            else:
                raise ConfigError("T", "a list of slot lengths needs --scenario slot-sweep")
        flags.tau_list = _durations(flags.tau) if flags.tau else None
        cfg = parse_config(flags.config, overrides)
        manifest = RunManifest(
            scenario=flags.scenario, config_path=flags.config,
            out_dir=Path(flags.out),
            run_id=f"{time.strftime('%Y%m%dT%H%M%S')}-seed{cfg.seed}")
    except (ConfigError, ValueError, OSError) as exc:
        print(f"sdcp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_scenario(manifest, cfg, flags)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"sdcp: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
