"""Closed-loop defense runtime plus the SIFT random-drop baseline.

One driver simulates the scenario tick by tick: packets hit the switch, new
flows toward the server open connections, and every collection period the
chosen defense inspects a stats snapshot and reacts.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classifiers import TrainedModel, predict
from .dataplane import (
    FlowKey,
    ForwardResult,
    ServerConfig,
    ServerModel,
    StatsSnapshot,
    Switch,
    to_ticks,
)
from .features import extract, mask_features, project
from .traffic import Label, Scenario, attack_sources, generate_timeline, ground_truth

METHOD_QMIND = "qmind"
METHOD_SIFT = "sift"
METHOD_NONE = "none"
METHODS = (METHOD_QMIND, METHOD_SIFT, METHOD_NONE)


@dataclass(frozen=True)
class MitigationPolicy:
    src_ip: str
    issued_at: int  # ticks
    block_until: int  # ticks
    reason: str = "detected"

    def __post_init__(self) -> None:
        if self.block_until <= self.issued_at:
            raise ValueError("block_until must be after issued_at")


@dataclass
class DataplaneConfig:
    capacity: int = 1500
    idle_timeout: float = 10.0  # seconds
    hard_timeout: float = 0.0  # 0 disables
    tick: float = 0.1

    def make_switch(self) -> Switch:
        return Switch(
            capacity=self.capacity,
            idle_timeout=to_ticks(self.idle_timeout, self.tick),
            hard_timeout=to_ticks(self.hard_timeout, self.tick),
        )


@dataclass
class DefenseConfig:
    model: TrainedModel
    mask: int
    collection_period: float = 5.0  # seconds
    block_duration: float = 30.0  # seconds
    debounce: int = 1  # attack verdicts required before a policy is issued

    def __post_init__(self) -> None:
        if self.model.n_features != len(mask_features(self.mask)):
            raise ValueError(
                f"model expects {self.model.n_features} features but mask selects "
                f"{len(mask_features(self.mask))}"
            )


@dataclass
class SiftConfig:
    threshold: int  # flow count that triggers random eviction
    drop_batch: int

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")
        if self.drop_batch <= 0:
            raise ValueError("drop_batch must be > 0")


def defense_step(
    now: int,
    snapshot: StatsSnapshot,
    prev_snapshot: Optional[StatsSnapshot],
    cfg: DefenseConfig,
    switch: Switch,
    skip_ips: frozenset[str] = frozenset(),
    verdict_streaks: Optional[dict[str, int]] = None,
    tick: float = 0.1,
    window_index: int = 0,
) -> tuple[list[MitigationPolicy], list[tuple[str, int]]]:
    """Classify every active source; emit a policy per detected attacker.

    Returns (policies, verdicts) where verdicts are (src_ip, 0/1). Sources that
    are already blocked, or in skip_ips (the protected server), are not judged.
    """
    policies: list[MitigationPolicy] = []
    verdicts: list[tuple[str, int]] = []
    streaks = verdict_streaks if verdict_streaks is not None else {}
    block_ticks = to_ticks(cfg.block_duration, tick)
    for src in snapshot.sources():
        if src in skip_ips or switch.blocklist.blocked(src, now):
            continue
        vec = extract(src, snapshot, prev_snapshot, window_index=window_index, tick=tick)
        if vec is None:
            continue
        verdict = predict(cfg.model, project(vec, cfg.mask))
        verdicts.append((src, verdict))
        if verdict == 1:
            streaks[src] = streaks.get(src, 0) + 1
            if streaks[src] >= cfg.debounce:
                policies.append(MitigationPolicy(src, now, now + block_ticks))
                streaks[src] = 0
        else:
            streaks[src] = 0
    return policies, verdicts


def sift_step(now: int, switch: Switch, cfg: SiftConfig, rng: np.random.Generator) -> list[FlowKey]:
    """Threshold-triggered random eviction: the SlowTCAM-style baseline."""
    if len(switch.rules) <= cfg.threshold:
        return []
    keys = sorted(switch.rules)
    batch = min(cfg.drop_batch, len(keys))
    picks = rng.choice(len(keys), size=batch, replace=False)
    victims = [keys[i] for i in sorted(picks)]
    switch.delete_rules(victims, now)
    return victims


@dataclass
class PeriodRow:
    time: float  # seconds
    occupancy: int
    response_time: float
    refusals: int
    policies_issued: int
    deleted_rules: int
    deleted_malicious: int


@dataclass
class RunLog:
    method: str
    tick: float
    duration: float
    rows: list[PeriodRow] = field(default_factory=list)
    verdicts: list[tuple[int, str, int]] = field(default_factory=list)  # (tick, src, verdict)
    deletions: list[tuple[int, FlowKey, bool]] = field(default_factory=list)  # (tick, key, malicious)
    overflow_events: list[tuple[int, FlowKey]] = field(default_factory=list)
    attack_ips: frozenset[str] = frozenset()
    final_rules: list[FlowKey] = field(default_factory=list)
    snapshots: list[StatsSnapshot] = field(default_factory=list)


@dataclass
class RuntimeReport:
    method: str
    detection_time: Optional[float]  # seconds since attack start; None if never
    drop_accuracy: float
    malicious_residue: float
    overflow_count: int
    time_to_overflow: Optional[float]
    response_time_mean: float
    refusals_total: int


def run_simulation(
    scenario: Scenario,
    dp_cfg: DataplaneConfig,
    server_cfg: ServerConfig,
    method: str = METHOD_NONE,
    defense_cfg: Optional[DefenseConfig] = None,
    sift_cfg: Optional[SiftConfig] = None,
    collection_period: float = 5.0,
    traffic_seed: int = 0,
    sift_seed: int = 0,
) -> RunLog:
    """Run one scenario under the chosen defense and record everything."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method == METHOD_QMIND and defense_cfg is None:
        raise ValueError("qmind method needs a DefenseConfig")
    if method == METHOD_SIFT and sift_cfg is None:
        raise ValueError("sift method needs a SiftConfig")

    tick = dp_cfg.tick
    period = defense_cfg.collection_period if defense_cfg is not None else collection_period
    period_ticks = to_ticks(period, tick)
    duration_ticks = to_ticks(scenario.duration, tick)
    events = generate_timeline(scenario, traffic_seed)
    truth = ground_truth(scenario)
    attack_ips = attack_sources(scenario)

    switch = dp_cfg.make_switch()
    server = ServerModel(server_cfg, tick)
    sift_rng = np.random.default_rng(sift_seed)
    log = RunLog(method=method, tick=tick, duration=scenario.duration, attack_ips=attack_ips)

    skip = frozenset({scenario.server_ip})
    streaks: dict[str, int] = {}
    prev_snapshot: Optional[StatsSnapshot] = None
    window_index = 0
    ev_i = 0
    n_events = len(events)

    for now in range(duration_ticks + 1):
        switch.expire_flows(now)
        attempts: list[tuple[FlowKey, bool]] = []
        while ev_i < n_events and events[ev_i].time <= now:
            ev = events[ev_i]
            ev_i += 1
            result = switch.handle_packet(ev.key, ev.size_bytes, now)
            if result is ForwardResult.INSTALLED and ev.key.dst_ip == scenario.server_ip:
                attempts.append((ev.key, ev.held_open))
        resp, refusals = server.step(now, attempts)

        if now > 0 and now % period_ticks == 0:
            snapshot = switch.collect_stats(now)
            policies_issued = 0
            deleted = 0
            deleted_malicious = 0

            if method == METHOD_QMIND:
                policies, verdicts = defense_step(
                    now, snapshot, prev_snapshot, defense_cfg, switch,
                    skip_ips=skip, verdict_streaks=streaks, tick=tick,
                    window_index=window_index,
                )
                log.verdicts.extend((now, src, v) for src, v in verdicts)
                for policy in policies:
                    victim_keys = [k for k in sorted(switch.rules) if k.src_ip == policy.src_ip]
                    switch.apply_policy(policy, now)
                    server.close_source(policy.src_ip)
                    policies_issued += 1
                    for k in victim_keys:
                        malicious = truth.get(k.src_ip) is Label.ATTACK
                        log.deletions.append((now, k, malicious))
                        deleted += 1
                        deleted_malicious += int(malicious)
            elif method == METHOD_SIFT:
                victims = sift_step(now, switch, sift_cfg, sift_rng)
                server.close_keys(victims)
                for k in victims:
                    malicious = truth.get(k.src_ip) is Label.ATTACK
                    log.deletions.append((now, k, malicious))
                    deleted += 1
                    deleted_malicious += int(malicious)

            log.rows.append(
                PeriodRow(
                    time=now * tick,
                    occupancy=len(switch.rules),
                    response_time=server.response_time(),
                    refusals=refusals,
                    policies_issued=policies_issued,
                    deleted_rules=deleted,
                    deleted_malicious=deleted_malicious,
                )
            )
            log.snapshots.append(snapshot)
            prev_snapshot = snapshot
            window_index += 1

    log.overflow_events = list(switch.overflow_events)
    log.final_rules = sorted(switch.rules)
    return log


def measure(log: RunLog, attack_start: float = 0.0) -> RuntimeReport:
    """Summary measurements from one completed run."""
    detection_time: Optional[float] = None
    for t, src, verdict in log.verdicts:
        if verdict == 1 and src in log.attack_ips:
            detection_time = t * log.tick - attack_start
            break
    if not log.attack_ips:
        detection_time = None

    total_deleted = len(log.deletions)
    malicious_deleted = sum(1 for _, _, m in log.deletions if m)
    drop_accuracy = malicious_deleted / total_deleted if total_deleted else 1.0

    live_malicious = sum(1 for k in log.final_rules if k.src_ip in log.attack_ips)
    denom = live_malicious + malicious_deleted
    malicious_residue = live_malicious / denom if denom else 0.0

    time_to_overflow = log.overflow_events[0][0] * log.tick if log.overflow_events else None
    response_mean = float(np.mean([r.response_time for r in log.rows])) if log.rows else 0.0

    return RuntimeReport(
        method=log.method,
        detection_time=detection_time,
        drop_accuracy=drop_accuracy,
        malicious_residue=malicious_residue,
        overflow_count=len(log.overflow_events),
        time_to_overflow=time_to_overflow,
        response_time_mean=response_mean,
        refusals_total=sum(r.refusals for r in log.rows),
    )


REPORT_SCHEMA_VERSION = 1

REPORT_CSV_HEADER = [
    "time", "occupancy", "response_time", "refusals",
    "policies_issued", "deleted_rules", "deleted_malicious",
]


def write_report_csv(log: RunLog, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_CSV_HEADER)
        for r in log.rows:
            writer.writerow(
                [repr(r.time), r.occupancy, repr(r.response_time), r.refusals,
                 r.policies_issued, r.deleted_rules, r.deleted_malicious]
            )


def summary_doc(report: RuntimeReport) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "method": report.method,
        "detection_time": report.detection_time,
        "drop_accuracy": report.drop_accuracy,
        "malicious_residue": report.malicious_residue,
        "overflow_events": report.overflow_count,
        "time_to_overflow": report.time_to_overflow,
        "response_time_mean": report.response_time_mean,
        "refusals_total": report.refusals_total,
    }


def write_summary_json(report: RuntimeReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary_doc(report), fh, indent=1)
