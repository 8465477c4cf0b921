"""Seeded generators for benign clients and stealthy ON-OFF attackers.

Pure functions of (scenario, seed): identical inputs produce byte-identical
event streams, which is what makes every downstream experiment replayable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .dataplane import DEFAULT_TICK, TCP, UDP, FlowKey, to_ticks


class Label(Enum):
    NORMAL = 0
    ATTACK = 1


@dataclass
class BenignClientConfig:
    src_ip: str
    request_rate: float  # mean new flows per second (Poisson)
    flow_lifetime: float  # mean flow duration, seconds (exponential)
    dst_port_pool: list[int] = field(default_factory=lambda: [80])
    tcp_fraction: float = 1.0
    packet_interval: float = 0.5  # in-flow packet spacing, seconds
    size_range: tuple[int, int] = (200, 1400)

    def __post_init__(self) -> None:
        if self.request_rate <= 0:
            raise ValueError("request_rate must be > 0")
        if not 0.0 <= self.tcp_fraction <= 1.0:
            raise ValueError("tcp_fraction must be in [0, 1]")


@dataclass
class AttackerConfig:
    src_ip: str
    unique_rate: float  # new flow keys per second during on-time
    on_time: float
    off_time: float
    keepalive_interval: float  # per-key resend period, keep below idle_timeout
    hold_connections: bool = True
    spoof_pool: Optional[list[str]] = None
    dst_port: int = 80
    packet_size: int = 120  # small incomplete request

    def __post_init__(self) -> None:
        if self.unique_rate <= 0:
            raise ValueError("unique_rate must be > 0")
        if self.on_time <= 0:
            raise ValueError("on_time must be > 0")
        if self.off_time < 0:
            raise ValueError("off_time must be >= 0")
        if self.keepalive_interval <= 0:
            raise ValueError("keepalive_interval must be > 0")

    def source_ips(self) -> list[str]:
        return list(self.spoof_pool) if self.spoof_pool else [self.src_ip]


class LabeledPacketEvent(NamedTuple):
    time: int  # ticks
    key: FlowKey
    size_bytes: int
    label: Label
    held_open: bool


@dataclass
class Scenario:
    benign: list[BenignClientConfig]
    attackers: list[AttackerConfig]
    duration: float  # seconds
    server_ip: str = "10.0.0.1"
    responses: bool = True  # emit server->client reply flows for benign traffic
    tick: float = DEFAULT_TICK

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError("duration must be > 0")


def _benign_events(cfg: BenignClientConfig, scenario: Scenario, rng: np.random.Generator) -> list[LabeledPacketEvent]:
    events: list[LabeledPacketEvent] = []
    tick = scenario.tick
    duration = scenario.duration
    lo, hi = cfg.size_range
    t = 0.0
    while True:
        t += rng.exponential(1.0 / cfg.request_rate)
        if t >= duration:
            break
        src_port = int(rng.integers(1024, 65536))
        dst_port = int(rng.choice(cfg.dst_port_pool))
        proto = TCP if rng.random() < cfg.tcp_fraction else UDP
        key = FlowKey(cfg.src_ip, scenario.server_ip, src_port, dst_port, proto)
        lifetime = rng.exponential(cfg.flow_lifetime)
        end = min(t + lifetime, duration)
        pkt_t = t
        while True:
            size = int(rng.integers(lo, hi + 1))
            tk = to_ticks(pkt_t, tick)
            events.append(LabeledPacketEvent(tk, key, size, Label.NORMAL, False))
            if scenario.responses:
                rsize = int(rng.integers(lo, hi + 1))
                events.append(LabeledPacketEvent(tk, key.reversed(), rsize, Label.NORMAL, False))
            pkt_t += cfg.packet_interval
            if pkt_t >= end:
                break
    return events


def _phase_is_on(t: float, on: float, off: float) -> bool:
    if off == 0:
        return True
    return (t % (on + off)) < on


def _attack_events(cfg: AttackerConfig, scenario: Scenario, rng: np.random.Generator) -> list[LabeledPacketEvent]:
    events: list[LabeledPacketEvent] = []
    tick = scenario.tick
    duration = scenario.duration
    cycle = cfg.on_time + cfg.off_time
    sources = cfg.source_ips()
    k = 0
    while True:
        # k-th new key lands at the k/unique_rate-th second of accumulated on-time
        active = k / cfg.unique_rate
        real = (active // cfg.on_time) * cycle + (active % cfg.on_time) if cfg.off_time > 0 else active
        if real >= duration:
            break
        src = sources[k % len(sources)]
        src_port = 1024 + (k // len(sources)) % 64512
        key = FlowKey(src, scenario.server_ip, src_port, cfg.dst_port, TCP)
        events.append(
            LabeledPacketEvent(to_ticks(real, tick), key, cfg.packet_size, Label.ATTACK, cfg.hold_connections)
        )
        # keepalive resends keep the installed rule from idle-expiring, but the
        # attacker is silent during off-time
        j = 1
        while True:
            ka = real + j * cfg.keepalive_interval
            if ka >= duration:
                break
            if _phase_is_on(ka, cfg.on_time, cfg.off_time):
                events.append(
                    LabeledPacketEvent(to_ticks(ka, tick), key, cfg.packet_size, Label.ATTACK, cfg.hold_connections)
                )
            j += 1
        k += 1
    return events


def generate_timeline(scenario: Scenario, seed: int) -> list[LabeledPacketEvent]:
    """Produce the time-ordered labeled packet stream for one scenario."""
    if not scenario.benign and not scenario.attackers:
        raise ValueError("scenario has no traffic generators")
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(scenario.benign) + len(scenario.attackers))
    events: list[LabeledPacketEvent] = []
    for i, cfg in enumerate(scenario.benign):
        events.extend(_benign_events(cfg, scenario, np.random.default_rng(children[i])))
    for i, cfg in enumerate(scenario.attackers):
        rng = np.random.default_rng(children[len(scenario.benign) + i])
        events.extend(_attack_events(cfg, scenario, rng))
    events.sort(key=lambda e: (e.time, e.key, e.size_bytes, e.label.value))
    return events


def ground_truth(scenario: Scenario) -> dict[str, Label]:
    """Map every generator source IP (including spoof pools) to its label.

    The server's own address is intentionally absent: reply flows it emits are
    infrastructure, not a monitored source.
    """
    truth: dict[str, Label] = {}
    for cfg in scenario.benign:
        truth[cfg.src_ip] = Label.NORMAL
    for cfg in scenario.attackers:
        truth[cfg.src_ip] = Label.ATTACK
        for ip in cfg.source_ips():
            truth[ip] = Label.ATTACK
    return truth


def attack_sources(scenario: Scenario) -> frozenset[str]:
    return frozenset(ip for ip, lab in ground_truth(scenario).items() if lab is Label.ATTACK)
