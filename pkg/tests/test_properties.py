"""Property-based invariants for the arithmetic and dataplane cores."""
import math

import pytest
from hypothesis import given, settings, strategies as st

from qmind.dataplane import FlowKey, Switch, TCP
from qmind.evaluation import ConfusionMatrix, DetectionMetrics, metrics
from qmind.features import _entropy
from qmind.qlearning import RewardWeights, q_update, reward, state_key

SETTINGS = settings(max_examples=300, deadline=None)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
metric_tuples = st.tuples(unit, unit, unit, unit, unit)


@SETTINGS
@given(metric_tuples)
def test_reward_bounded(vals):
    r = reward(DetectionMetrics(*vals))
    assert 0.2 * math.exp(-1.0) <= r <= 1.0


@SETTINGS
@given(metric_tuples, st.integers(0, 4), unit)
def test_reward_monotone(vals, i, repl):
    base = reward(DetectionMetrics(*vals))
    bumped = list(vals)
    bumped[i] = repl
    other = reward(DetectionMetrics(*bumped))
    if i < 4:  # hit metrics help, false alarms hurt
        assert (other >= base - 1e-12) if repl >= vals[i] else (other <= base + 1e-12)
    else:
        assert (other <= base + 1e-12) if repl >= vals[i] else (other >= base - 1e-12)


@SETTINGS
@given(metric_tuples)
def test_state_key_bins(vals):
    key = state_key(DetectionMetrics(*vals))
    assert len(key) == 5
    assert all(0 <= b <= 10 for b in key)
    for b, v in zip(key, vals):
        assert b / 10.0 <= v + 1e-9


@SETTINGS
@given(
    st.floats(min_value=-10.0, max_value=10.0, allow_nan=False),
    st.floats(min_value=-10.0, max_value=10.0, allow_nan=False),
    st.floats(min_value=0.01, max_value=1.0),
)
def test_q_update_contraction(q_old, r, alpha):
    q_new = q_update(q_old, r, alpha)
    assert abs(q_new - r) <= abs(q_old - r) + 1e-12
    assert min(q_old, r) - 1e-12 <= q_new <= max(q_old, r) + 1e-12


@SETTINGS
@given(st.lists(st.integers(min_value=1, max_value=10_000), min_size=0, max_size=40))
def test_entropy_normalized(counts):
    h = _entropy(counts)
    assert 0.0 <= h <= 1.0 + 1e-12
    if len(counts) > 1 and len(set(counts)) == 1:
        assert h == pytest.approx(1.0)  # uniform distribution maxes out


@SETTINGS
@given(st.integers(0, 10_000), st.integers(0, 10_000), st.integers(0, 10_000), st.integers(0, 10_000))
def test_metrics_bounded(tp, tn, fp, fn):
    if tp + tn + fp + fn == 0:
        return
    m = metrics(ConfusionMatrix(tp, tn, fp, fn))
    assert all(0.0 <= v <= 1.0 for v in m.as_tuple())


@SETTINGS
@given(
    st.integers(min_value=1, max_value=8),
    st.lists(
        st.tuples(st.integers(0, 30), st.integers(0, 40), st.booleans()),
        min_size=1, max_size=60,
    ),
)
def test_switch_capacity_invariant(capacity, ops):
    """Under arbitrary interleavings of packets and expiry the table never
    exceeds capacity and never holds an expired rule."""
    sw = Switch(capacity=capacity, idle_timeout=5)
    now = 0
    for dt, port, do_expire in sorted(ops):
        now = dt
        if do_expire:
            sw.expire_flows(now)
            assert all(r.expires_at() > now for r in sw.rules.values())
        sw.handle_packet(FlowKey("10.0.0.2", "10.0.0.1", 1024 + port, 80, TCP), 10, now)
        assert len(sw) <= capacity
    sw.expire_flows(now + 5)
    assert len(sw) == 0


@SETTINGS
@given(st.integers(0, 20), st.integers(1, 10), st.integers(0, 40))
def test_switch_expiry_boundary(created, idle, probe):
    sw = Switch(capacity=4, idle_timeout=idle)
    key = FlowKey("10.0.0.2", "10.0.0.1", 1024, 80, TCP)
    sw.handle_packet(key, 10, created)
    sw.expire_flows(probe)
    assert (key in sw.rules) == (probe < created + idle)


@SETTINGS
@given(st.lists(unit, min_size=5, max_size=5))
def test_weights_require_unit_sum(parts):
    total = math.fsum(parts)
    try:
        RewardWeights(*parts)
        ok = True
    except ValueError:
        ok = False
    assert ok == (abs(total - 1.0) <= 1e-9)
