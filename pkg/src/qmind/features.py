"""Per-source traffic features computed from consecutive stats snapshots.

A window is the span between two snapshots; every source with at least one
flow in the window (live or removed during it) yields one 10-dimensional
vector. All degenerate cases map to finite sentinels, never NaN.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np

from .dataplane import DEFAULT_TICK, TCP, FlowKey, FlowStat, StatsSnapshot
from .traffic import Label


class FeatureId(IntEnum):
    AVG_PKT_PER_FLOW = 0
    AVG_PKT_SIZE_PER_FLOW = 1
    PKT_CHANGE_RATIO = 2
    FLOW_CHANGE_RATIO = 3
    AVG_DURATION_PER_FLOW = 4
    PAIR_FLOW_PCT = 5
    PORT_GROWTH = 6
    AVG_FLOW_IAT = 7
    TCP_FRACTION = 8
    FLOW_ENTROPY = 9


N_FEATURES = len(FeatureId)
FULL_MASK = (1 << N_FEATURES) - 1

CSV_HEADER = ["src_ip", "window"] + [f"f{i + 1}" for i in range(N_FEATURES)] + ["label"]


@dataclass(frozen=True)
class FeatureVector:
    src_ip: str
    window_index: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} features, got {len(self.values)}")


@dataclass(frozen=True)
class LabeledSample:
    vector: FeatureVector
    label: Label


def mask_features(mask: int) -> list[FeatureId]:
    """Feature ids selected by a bit mask, in ascending FeatureId order."""
    if not 0 < mask <= FULL_MASK:
        raise ValueError(f"invalid feature mask {mask:#x}")
    return [fid for fid in FeatureId if mask & (1 << fid)]


def project(vec, mask: int) -> np.ndarray:
    """Reduce a FeatureVector (or 10-array) to the masked components."""
    ids = mask_features(mask)
    if len(ids) < 2:
        raise ValueError("feature mask must select at least 2 features")
    values = vec.values if isinstance(vec, FeatureVector) else vec
    arr = np.asarray(values, dtype=float)
    if arr.shape[-1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES}-dimensional input")
    return arr[..., [int(i) for i in ids]]


def _entropy(packet_counts: Sequence[int]) -> float:
    n = len(packet_counts)
    if n <= 1:
        return 0.0
    total = float(sum(packet_counts))
    h = 0.0
    for c in packet_counts:
        p = c / total
        if p > 0:
            h -= p * math.log(p)
    return h / math.log(n)


def _extract_from_flows(
    src_ip: str,
    window_index: int,
    cur_flows: list[FlowStat],
    prev_flows: list[FlowStat],
    pair_keys: frozenset[FlowKey],
    cur_time: int,
    prev_time: Optional[int],
    tick: float,
) -> FeatureVector:
    n_flows = len(cur_flows)
    pkts = sum(f.packets for f in cur_flows)
    byts = sum(f.bytes for f in cur_flows)

    avg_pkt_per_flow = pkts / n_flows
    avg_pkt_size = byts / pkts

    if prev_time is None:
        pkt_change = 0.0
        flow_change = 0.0
    else:
        prev_pkts = sum(f.packets for f in prev_flows)
        pkt_change = (pkts - prev_pkts) / max(prev_pkts, 1)
        flow_change = (n_flows - len(prev_flows)) / max(len(prev_flows), 1)

    avg_duration = (
        sum((f.removed_at if f.removed_at is not None else cur_time) - f.created_at for f in cur_flows)
        / n_flows
        * tick
    )

    pair_pct = sum(1 for f in cur_flows if f.key.reversed() in pair_keys) / n_flows

    cur_ports = {f.key.dst_port for f in cur_flows}
    prev_ports = {f.key.dst_port for f in prev_flows}
    port_growth = float(len(cur_ports - prev_ports))

    window_start = prev_time if prev_time is not None else 0
    new_times = sorted(f.created_at for f in cur_flows if f.created_at > window_start or prev_time is None)
    if len(new_times) < 2:
        avg_iat = (cur_time - window_start) * tick
    else:
        gaps = [(b - a) for a, b in zip(new_times, new_times[1:])]
        avg_iat = sum(gaps) / len(gaps) * tick

    tcp_fraction = sum(1 for f in cur_flows if f.key.proto == TCP) / n_flows
    entropy = _entropy([f.packets for f in cur_flows])

    return FeatureVector(
        src_ip=src_ip,
        window_index=window_index,
        values=(
            float(avg_pkt_per_flow),
            float(avg_pkt_size),
            float(pkt_change),
            float(flow_change),
            float(avg_duration),
            float(pair_pct),
            float(port_growth),
            float(avg_iat),
            float(tcp_fraction),
            float(entropy),
        ),
    )


def _group_by_source(snapshot: StatsSnapshot) -> dict[str, list[FlowStat]]:
    groups: dict[str, list[FlowStat]] = {}
    for f in snapshot.all_flows():
        groups.setdefault(f.key.src_ip, []).append(f)
    return groups


def extract(
    src_ip: str,
    current: StatsSnapshot,
    previous: Optional[StatsSnapshot] = None,
    window_index: int = 0,
    tick: float = DEFAULT_TICK,
) -> Optional[FeatureVector]:
    """Feature vector for one source over one window; None if the source is silent."""
    if previous is not None and current.time <= previous.time:
        raise ValueError("current snapshot must be later than previous")
    cur_flows = [f for f in current.all_flows() if f.key.src_ip == src_ip]
    if not cur_flows:
        return None
    prev_flows = (
        [f for f in previous.all_flows() if f.key.src_ip == src_ip] if previous is not None else []
    )
    return _extract_from_flows(
        src_ip,
        window_index,
        cur_flows,
        prev_flows,
        current.key_set(),
        current.time,
        previous.time if previous is not None else None,
        tick,
    )


def build_dataset(
    snapshots: Sequence[StatsSnapshot],
    truth: dict[str, Label],
    tick: float = DEFAULT_TICK,
) -> list[LabeledSample]:
    """One labeled sample per (active source, window), in deterministic order."""
    samples: list[LabeledSample] = []
    prev_groups: dict[str, list[FlowStat]] = {}
    prev_time: Optional[int] = None
    for idx, snap in enumerate(snapshots):
        groups = _group_by_source(snap)
        pair_keys = snap.key_set()
        for src in sorted(groups):
            label = truth.get(src)
            if label is None:
                continue
            vec = _extract_from_flows(
                src, idx, groups[src], prev_groups.get(src, []), pair_keys,
                snap.time, prev_time, tick,
            )
            samples.append(LabeledSample(vec, label))
        prev_groups = groups
        prev_time = snap.time
    return samples


def write_dataset_csv(samples: Sequence[LabeledSample], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in samples:
            writer.writerow(
                [s.vector.src_ip, s.vector.window_index]
                + [repr(v) for v in s.vector.values]
                + [s.label.value]
            )


def read_dataset_csv(path) -> list[LabeledSample]:
    """Parse the dataset schema; raises ValueError with row numbers on violations."""
    samples: list[LabeledSample] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"bad dataset header: expected {CSV_HEADER}, got {header}")
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"row {row_no}: expected {len(CSV_HEADER)} columns, got {len(row)}")
            try:
                window = int(row[1])
                values = tuple(float(v) for v in row[2:-1])
                label = Label(int(row[-1]))
            except ValueError as exc:
                raise ValueError(f"row {row_no}: {exc}") from exc
            samples.append(LabeledSample(FeatureVector(row[0], window, values), label))
    return samples


def dataset_arrays(samples: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    """Dataset as (n, 10) features and (n,) 0/1 labels."""
    X = np.array([s.vector.values for s in samples], dtype=float)
    y = np.array([s.label.value for s in samples], dtype=int)
    return X, y
