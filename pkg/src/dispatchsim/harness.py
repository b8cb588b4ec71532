"""Experiment harness: scenario runs, training schedule, evaluation, reports."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agent import DQNAgent, DQNPolicy
from .config import ExperimentConfig, Scenario
from .demand import (
    DemandError,
    DemandSource,
    flat_hourly_rates,
    generate_daily_calls,
    load_trip_records,
    sample_tolerance,
)
from .engine import DayMetrics, build_fleet, run_day
from .entities import Call
from .policies import DispatchPolicy, make_baseline
from .qnet import load_checkpoint
from .rng import substream

METRIC_NAMES = ("avg_delay_min", "cancel_rate", "total_service_min")

PER_DAY_HEADER = (
    "date,policy,scenario,created,served,canceled,"
    "avg_delay_min,cancel_rate,total_service_min,seed"
)
REPORT_HEADER = "policy,scenario,metric,mean,ci_low,ci_high,n"


def demand_source_from_config(cfg: ExperimentConfig, daily_calls: int) -> DemandSource:
    if cfg.demand_mode == "records":
        if not cfg.records_path:
            raise DemandError("demand_mode=records requires records_path")
        with open(cfg.records_path, "r", encoding="utf-8") as fh:
            records, _dropped = load_trip_records(fh, cfg.box)
        return DemandSource(mode="records", records=records, box=cfg.box)
    rate = cfg.synthetic_base_rate or daily_calls / 24.0
    clusters = cfg.cluster_list if cfg.spatial_mode == "clusters" else []
    return DemandSource(
        mode="synthetic",
        hourly_rates=flat_hourly_rates(rate),
        clusters=clusters,
        box=cfg.box,
    )


def build_calls(
    source: DemandSource,
    cfg: ExperimentConfig,
    day_of_week: int,
    daily_calls: int,
    demand_rng: np.random.Generator,
    tolerance_rng: np.random.Generator,
) -> List[Call]:
    stochastic = cfg.stochastic
    prototypes = generate_daily_calls(source, day_of_week, daily_calls, demand_rng)
    return [
        Call(
            id=i,
            created_at=t,
            origin=origin,
            destination=dest,
            max_wait=sample_tolerance(stochastic, tolerance_rng),
        )
        for i, (t, origin, dest) in enumerate(prototypes)
    ]


def simulate_day(
    cfg: ExperimentConfig,
    source: DemandSource,
    scenario: Scenario,
    policy: DispatchPolicy,
    seed: int,
    stream_tag: Sequence,
    day_of_week: int,
    daily_calls: int,
    trace: Optional[list] = None,
) -> DayMetrics:
    """One simulated day; all randomness comes from named substreams of `seed`."""
    calls = build_calls(
        source,
        cfg,
        day_of_week,
        daily_calls,
        substream(seed, "demand", *stream_tag),
        substream(seed, "tolerance", *stream_tag),
    )
    fleet = build_fleet(
        scenario.fleet_size(daily_calls),
        cfg.stochastic,
        substream(seed, "placement", *stream_tag),
        substream(seed, "rejection", *stream_tag),
        cfg.box,
    )
    # day_of_week anchors the weekly cyclical features
    week_offset = cfg.week_origin_offset + day_of_week * 1440.0
    metrics = run_day(
        fleet,
        calls,
        policy,
        policy,
        speed=cfg.speed,
        driver_rng=substream(seed, "driver", *stream_tag),
        week_origin_offset=week_offset,
        max_events=cfg.max_events_per_day,
        trace=trace,
    )
    metrics.policy = policy.name
    metrics.scenario = scenario.name
    metrics.seed = seed
    return metrics


def make_policy(
    name: str,
    cfg: ExperimentConfig,
    seed: int,
    stream_tag: Sequence,
    dqn_policy: Optional[DQNPolicy] = None,
) -> DispatchPolicy:
    if name == "dqn":
        if dqn_policy is None:
            raise ValueError("dqn policy requested but no trained agents supplied")
        return dqn_policy
    return make_baseline(name, rng=substream(seed, "policy", name, *stream_tag))


def fresh_dqn_policy(cfg: ExperimentConfig, seed: int) -> DQNPolicy:
    agent_cfg = cfg.agent
    agents = {}
    for agent_name in ("new_call", "free_vehicle"):
        agents[agent_name] = DQNAgent(
            agent_name,
            agent_cfg,
            init_rng=substream(seed, "agent-init", agent_name),
            explore_rng=substream(seed, "exploration", agent_name),
        )
    return DQNPolicy(agents["new_call"], agents["free_vehicle"])


# -- training ------------------------------------------------------------------


def _per_thousand_means(series: List[float]) -> List[float]:
    return [
        float(np.mean(series[i : i + 1000])) for i in range(0, len(series), 1000)
    ]


def run_training(
    cfg: ExperimentConfig, out_dir: Optional[str] = None
) -> Tuple[DQNPolicy, Dict[str, List[float]], List[DayMetrics]]:
    """Train both agents online over days x scenarios x repetitions.

    Returns the trained policy, the per-1000-sample learning curves and the
    per-training-day metrics.  Checkpoints and curves are written to
    `out_dir` when given.
    """
    seed = cfg.seed
    daily_calls = cfg.train_daily_calls
    source = demand_source_from_config(cfg, daily_calls)
    policy = fresh_dqn_policy(cfg, seed)
    policy.set_train_mode(True)

    day_metrics: List[DayMetrics] = []
    for day in range(cfg.train_days):
        for scenario in cfg.scenario_list:
            for rep in range(cfg.train_reps):
                tag = ("train", day, scenario.name, rep)
                metrics = simulate_day(
                    cfg, source, scenario, policy, seed, tag, day % 7, daily_calls
                )
                day_metrics.append(metrics)

    curves: Dict[str, List[float]] = {}
    for agent in (policy.new_call_agent, policy.free_vehicle_agent):
        curves[f"{agent.name}/reward"] = _per_thousand_means(agent.reward_history)
        curves[f"{agent.name}/q_value"] = _per_thousand_means(agent.q_history)
        curves[f"{agent.name}/loss"] = _per_thousand_means(agent.loss_history)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for agent in (policy.new_call_agent, policy.free_vehicle_agent):
            agent.save(os.path.join(out_dir, f"dqn_{agent.name}.ckpt"))
        with open(
            os.path.join(out_dir, "learning_curves.csv"), "w", encoding="utf-8", newline="\n"
        ) as fh:
            fh.write("series,index,value\n")
            for name in sorted(curves):
                for i, v in enumerate(curves[name]):
                    fh.write(f"{name},{i},{v:.9g}\n")
    return policy, curves, day_metrics


def load_dqn_policy(cfg: ExperimentConfig, checkpoint_dir: str) -> DQNPolicy:
    policy = fresh_dqn_policy(cfg, cfg.seed)
    for agent in (policy.new_call_agent, policy.free_vehicle_agent):
        path = os.path.join(checkpoint_dir, f"dqn_{agent.name}.ckpt")
        if not os.path.exists(path):
            raise FileNotFoundError(
                f"missing checkpoint for agent {agent.name!r}: {path}"
            )
        net, name = load_checkpoint(path)
        if name != agent.name:
            raise ValueError(f"checkpoint {path} is for agent {name!r}, expected {agent.name!r}")
        agent.load_network(net)
    policy.set_train_mode(False)
    return policy


# -- evaluation ------------------------------------------------------------------


@dataclass
class ReportRow:
    policy: str
    scenario: str
    metric: str
    mean: float
    ci_low: float
    ci_high: float
    n: int


def aggregate(per_day: List[DayMetrics]) -> List[ReportRow]:
    """Mean and 95% CI of each metric per (policy, scenario)."""
    groups: Dict[Tuple[str, str], List[DayMetrics]] = {}
    for m in per_day:
        groups.setdefault((m.policy, m.scenario), []).append(m)
    rows = []
    for (policy, scenario) in sorted(groups):
        days = groups[(policy, scenario)]
        for metric in sorted(METRIC_NAMES):
            values = np.array([_metric_value(d, metric) for d in days], dtype=float)
            mean = float(values.mean())
            sd = float(values.std(ddof=1)) if len(values) > 1 else 0.0
            half = 1.96 * sd / math.sqrt(len(values))
            rows.append(
                ReportRow(policy, scenario, metric, mean, mean - half, mean + half, len(values))
            )
    return rows


def _metric_value(m: DayMetrics, metric: str) -> float:
    if metric == "avg_delay_min":
        return m.avg_delay
    if metric == "cancel_rate":
        return m.cancel_rate
    if metric == "total_service_min":
        return m.sum_service_time
    raise ValueError(f"unknown metric {metric!r}")


def per_day_csv_lines(per_day: List[DayMetrics], dates: List[str]) -> List[str]:
    lines = [PER_DAY_HEADER]
    for date, m in zip(dates, per_day):
        lines.append(
            f"{date},{m.policy},{m.scenario},{m.calls_created},{m.calls_served},"
            f"{m.calls_canceled},{m.avg_delay:.9g},{m.cancel_rate:.9g},"
            f"{m.sum_service_time:.9g},{m.seed}"
        )
    return lines


def run_evaluation(
    cfg: ExperimentConfig,
    policy_names: Optional[List[str]] = None,
    dqn_policy: Optional[DQNPolicy] = None,
    checkpoint_dir: Optional[str] = None,
    out_dir: Optional[str] = None,
) -> Tuple[List[ReportRow], List[DayMetrics]]:
    """Deterministic greedy evaluation of each policy x scenario x day.

    Demand/fleet streams are keyed by (seed, day) only, so every policy sees
    the identical day; evaluation streams are disjoint from training streams.
    """
    policy_names = policy_names or cfg.policy_list
    if "dqn" in policy_names and dqn_policy is None:
        if checkpoint_dir is None:
            raise ValueError("dqn evaluation requires trained agents or a checkpoint_dir")
        dqn_policy = load_dqn_policy(cfg, checkpoint_dir)
    if dqn_policy is not None:
        dqn_policy.set_train_mode(False)

    daily_calls = cfg.daily_calls
    source = demand_source_from_config(cfg, daily_calls)
    per_day: List[DayMetrics] = []
    dates: List[str] = []
    for policy_name in policy_names:
        for scenario in cfg.scenario_list:
            for rep in range(cfg.eval_seeds):
                for day in range(cfg.eval_days):
                    tag = ("eval", rep, day)
                    policy = make_policy(policy_name, cfg, cfg.seed, tag, dqn_policy)
                    metrics = simulate_day(
                        cfg, source, scenario, policy, cfg.seed, tag, day % 7, daily_calls
                    )
                    metrics.seed = cfg.seed + rep
                    per_day.append(metrics)
                    dates.append(f"{rep}-{day}")

    report = aggregate(per_day)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_lines(os.path.join(out_dir, "per_day.csv"), per_day_csv_lines(per_day, dates))
        _write_lines(os.path.join(out_dir, "report.csv"), report_csv_lines(report))
    return report, per_day


# -- report emission ------------------------------------------------------------


def report_csv_lines(report: List[ReportRow]) -> List[str]:
    lines = [REPORT_HEADER]
    for r in sorted(report, key=lambda r: (r.policy, r.scenario, r.metric)):
        lines.append(
            f"{r.policy},{r.scenario},{r.metric},"
            f"{r.mean:.9g},{r.ci_low:.9g},{r.ci_high:.9g},{r.n}"
        )
    return lines


def report_text_table(report: List[ReportRow]) -> List[str]:
    header = f"{'policy':<8} {'scenario':<10} {'metric':<18} {'mean':>12} {'ci_low':>12} {'ci_high':>12} {'n':>4}"
    lines = [header, "-" * len(header)]
    for r in sorted(report, key=lambda r: (r.policy, r.scenario, r.metric)):
        lines.append(
            f"{r.policy:<8} {r.scenario:<10} {r.metric:<18} "
            f"{r.mean:>12.4f} {r.ci_low:>12.4f} {r.ci_high:>12.4f} {r.n:>4}"
        )
    return lines


def emit_report(report: List[ReportRow], path, fmt: str = "csv") -> None:
    if not report:
        raise ValueError("report is empty")
    if fmt == "csv":
        _write_lines(path, report_csv_lines(report))
    elif fmt == "text-table":
        _write_lines(path, report_text_table(report))
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def _write_lines(path, lines: List[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def recompute_report_from_per_day_csv(path) -> List[ReportRow]:
    """Re-aggregate a per-day CSV; used by the `report` CLI verb."""
    metrics: List[DayMetrics] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != PER_DAY_HEADER:
            raise ValueError(f"{path}: unexpected per-day header")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 10:
                continue
            m = DayMetrics(
                policy=parts[1],
                scenario=parts[2],
                seed=int(parts[9]),
                calls_created=int(parts[3]),
                calls_served=int(parts[4]),
                calls_canceled=int(parts[5]),
            )
            served = int(parts[4])
            m.sum_delay = float(parts[6]) * served
            m.sum_service_time = float(parts[8])
            metrics.append(m)
    return aggregate(metrics)
