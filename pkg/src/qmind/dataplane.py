"""Discrete-time model of one OpenFlow-style switch plus a victim server.

Time is measured in integer ticks (default 0.1 s per tick); keeping
durations integral avoids float drift in timeout comparisons and makes
replays bit-identical.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

TCP = 6
UDP = 17

DEFAULT_TICK = 0.1  # seconds per tick


def to_ticks(seconds: float, tick: float = DEFAULT_TICK) -> int:
    """Convert a duration/instant in seconds to integer ticks."""
    return int(round(seconds / tick))


class FlowKey(NamedTuple):
    """5-tuple identifying a flow; tuple ordering gives deterministic iteration."""

    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    proto: int

    def reversed(self) -> "FlowKey":
        return FlowKey(self.dst_ip, self.src_ip, self.dst_port, self.src_port, self.proto)


class ForwardResult(Enum):
    MATCHED = "matched"
    INSTALLED = "installed"
    DROPPED_BLOCKED = "dropped_blocked"
    DROPPED_TABLE_FULL = "dropped_table_full"


@dataclass
class FlowRule:
    key: FlowKey
    created_at: int
    last_matched_at: int
    packets: int
    bytes: int
    idle_timeout: int
    hard_timeout: int = 0  # 0 disables hard expiry

    def expires_at(self) -> int:
        exp = self.last_matched_at + self.idle_timeout
        if self.hard_timeout > 0:
            exp = min(exp, self.created_at + self.hard_timeout)
        return exp


class FlowStat(NamedTuple):
    """Immutable per-flow record inside a StatsSnapshot."""

    key: FlowKey
    packets: int
    bytes: int
    created_at: int
    last_matched_at: int
    removed_at: Optional[int] = None  # None while the rule is live


@dataclass(frozen=True)
class StatsSnapshot:
    """Periodic stats poll: live flows plus flows removed since the last poll."""

    time: int
    flows: tuple[FlowStat, ...]
    removed: tuple[FlowStat, ...]

    def all_flows(self) -> tuple[FlowStat, ...]:
        return self.flows + self.removed

    def key_set(self) -> frozenset[FlowKey]:
        return frozenset(f.key for f in self.all_flows())

    def sources(self) -> list[str]:
        return sorted({f.key.src_ip for f in self.all_flows()})


class BlockList:
    """src_ip -> block expiry tick; an entry is active while now < expiry."""

    def __init__(self) -> None:
        self.entries: dict[str, int] = {}

    def blocked(self, src_ip: str, now: int) -> bool:
        expiry = self.entries.get(src_ip)
        return expiry is not None and now < expiry

    def add(self, src_ip: str, until: int) -> None:
        self.entries[src_ip] = max(until, self.entries.get(src_ip, 0))

    def prune(self, now: int) -> None:
        self.entries = {ip: t for ip, t in self.entries.items() if now < t}


class Switch:
    """One flow table with a hard capacity, idle/hard timeouts and a block list.

    All mutation goes through the four operations below; the simulation driver
    is the single owner and calls them sequentially.
    """

    def __init__(self, capacity: int, idle_timeout: int, hard_timeout: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if idle_timeout < 1:
            raise ValueError("idle_timeout must be >= 1 tick")
        self.capacity = capacity
        self.idle_timeout = idle_timeout
        self.hard_timeout = hard_timeout
        self.rules: dict[FlowKey, FlowRule] = {}
        self.blocklist = BlockList()
        self.overflow_events: list[tuple[int, FlowKey]] = []
        self._removed_buffer: list[FlowStat] = []
        # lazy min-heap of (candidate expiry, key); stale entries are re-checked
        self._expiry_heap: list[tuple[int, FlowKey]] = []

    def __len__(self) -> int:
        return len(self.rules)

    def handle_packet(self, key: FlowKey, size_bytes: int, now: int) -> ForwardResult:
        if self.blocklist.blocked(key.src_ip, now):
            return ForwardResult.DROPPED_BLOCKED
        rule = self.rules.get(key)
        if rule is not None:
            # refresh only the rule; the heap entry is corrected lazily on pop
            rule.packets += 1
            rule.bytes += size_bytes
            rule.last_matched_at = now
            return ForwardResult.MATCHED
        if len(self.rules) >= self.capacity:
            self.overflow_events.append((now, key))
            return ForwardResult.DROPPED_TABLE_FULL
        rule = FlowRule(
            key=key,
            created_at=now,
            last_matched_at=now,
            packets=1,
            bytes=size_bytes,
            idle_timeout=self.idle_timeout,
            hard_timeout=self.hard_timeout,
        )
        self.rules[key] = rule
        heapq.heappush(self._expiry_heap, (rule.expires_at(), key))
        return ForwardResult.INSTALLED

    def expire_flows(self, now: int) -> list[FlowRule]:
        """Remove every rule whose idle/hard timeout has elapsed (>= boundary)."""
        expired: list[FlowRule] = []
        heap = self._expiry_heap
        while heap and heap[0][0] <= now:
            _, key = heapq.heappop(heap)
            rule = self.rules.get(key)
            if rule is None:
                continue
            exp = rule.expires_at()
            if exp <= now:
                del self.rules[key]
                expired.append(rule)
                self._record_removed(rule, removed_at=exp)
            else:
                heapq.heappush(heap, (exp, key))
        expired.sort(key=lambda r: r.key)
        return expired

    def collect_stats(self, now: int) -> StatsSnapshot:
        flows = tuple(
            FlowStat(r.key, r.packets, r.bytes, r.created_at, r.last_matched_at)
            for r in (self.rules[k] for k in sorted(self.rules))
        )
        removed = tuple(sorted(self._removed_buffer, key=lambda s: (s.removed_at, s.key)))
        self._removed_buffer = []
        return StatsSnapshot(time=now, flows=flows, removed=removed)

    def apply_policy(self, policy, now: int) -> int:
        """Delete every rule of policy.src_ip and block the source. Idempotent."""
        deleted = self.delete_rules(
            [k for k in sorted(self.rules) if k.src_ip == policy.src_ip], now
        )
        self.blocklist.add(policy.src_ip, policy.block_until)
        return len(deleted)

    def delete_rules(self, keys: Sequence[FlowKey], now: int) -> list[FlowRule]:
        """Force-remove rules (mitigation or SIFT eviction); records removals."""
        removed: list[FlowRule] = []
        for key in keys:
            rule = self.rules.pop(key, None)
            if rule is not None:
                removed.append(rule)
                self._record_removed(rule, removed_at=now)
        return removed

    def _record_removed(self, rule: FlowRule, removed_at: int) -> None:
        self._removed_buffer.append(
            FlowStat(
                rule.key, rule.packets, rule.bytes, rule.created_at,
                rule.last_matched_at, removed_at,
            )
        )


@dataclass
class ServerConfig:
    slot_capacity: int = 150
    base_response_time: float = 0.05  # seconds
    penalty_coeff: float = 2.0
    hold_duration: float = 120.0  # seconds an attacker keeps a connection open
    service_duration: float = 1.0  # seconds a benign connection stays open


class ServerModel:
    """Victim server with finite connection slots.

    Response time degrades linearly with slot occupancy; when all slots are
    taken new attempts are refused.
    """

    def __init__(self, cfg: ServerConfig, tick: float = DEFAULT_TICK):
        self.cfg = cfg
        self.tick = tick
        self._hold_ticks = to_ticks(cfg.hold_duration, tick)
        self._service_ticks = to_ticks(cfg.service_duration, tick)
        # key -> (opened_at, close_at, is_held_open)
        self.open_connections: dict[FlowKey, tuple[int, int, bool]] = {}
        self.refused = 0

    def occupancy(self) -> float:
        return len(self.open_connections) / self.cfg.slot_capacity

    def response_time(self) -> float:
        return self.cfg.base_response_time * (1.0 + self.cfg.penalty_coeff * self.occupancy())

    def step(
        self,
        now: int,
        attempts: Sequence[tuple[FlowKey, bool]] = (),
        completed: Sequence[FlowKey] = (),
    ) -> tuple[float, int]:
        """Expire/complete connections, then admit new attempts.

        Returns (mean response time over admitted attempts, refusals this step);
        with no attempts the current probe response time is returned.
        """
        for key in completed:
            self.open_connections.pop(key, None)
        for key in [k for k, (_, close_at, _) in self.open_connections.items() if close_at <= now]:
            del self.open_connections[key]

        refusals = 0
        samples: list[float] = []
        for key, held in attempts:
            if key in self.open_connections:
                continue
            if len(self.open_connections) >= self.cfg.slot_capacity:
                refusals += 1
                continue
            samples.append(self.response_time())
            dur = self._hold_ticks if held else self._service_ticks
            self.open_connections[key] = (now, now + dur, held)
        self.refused += refusals
        rt = sum(samples) / len(samples) if samples else self.response_time()
        return rt, refusals

    def close_source(self, src_ip: str) -> int:
        victims = [k for k in self.open_connections if k.src_ip == src_ip]
        for k in victims:
            del self.open_connections[k]
        return len(victims)

    def close_keys(self, keys: Sequence[FlowKey]) -> int:
        n = 0
        for k in keys:
            if self.open_connections.pop(k, None) is not None:
                n += 1
        return n
