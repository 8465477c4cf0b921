"""Tabular Q-learning over (feature subset, classifier) actions.

With a discount of zero the problem is a contextual bandit: each action's
Q value tracks its own immediate fitness reward, and the optimal policy is
the global argmax over the table. Unvisited pairs look optimistic (Q = 1.0)
to the selection rule, which forces every action to be tried.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .classifiers import ClassifierKind, Hyperparams
from .evaluation import DetectionMetrics, ZERO_METRICS, cross_validate
from .features import FeatureId, N_FEATURES

OPTIMISTIC_Q = 1.0

StateKey = tuple[int, int, int, int, int]


@dataclass(frozen=True)
class Action:
    feature_mask: int
    kind: ClassifierKind

    def __post_init__(self) -> None:
        if not 0 < self.feature_mask < (1 << N_FEATURES):
            raise ValueError(f"feature mask out of range: {self.feature_mask:#x}")
        if bin(self.feature_mask).count("1") < 2:
            raise ValueError("an action needs at least 2 features")


@dataclass(frozen=True)
class RewardWeights:
    w_pr: float = 0.2
    w_re: float = 0.2
    w_fs: float = 0.2
    w_ac: float = 0.2
    w_fa: float = 0.2

    def __post_init__(self) -> None:
        parts = (self.w_pr, self.w_re, self.w_fs, self.w_ac, self.w_fa)
        if min(parts) < 0:
            raise ValueError("weights must be non-negative")
        if abs(math.fsum(parts) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")


def reward(state: DetectionMetrics, weights: RewardWeights = RewardWeights()) -> float:
    """Multi-metric fitness: weighted hit metrics plus exp(-false_alarm)."""
    return math.fsum(
        (
            weights.w_pr * state.precision,
            weights.w_re * state.recall,
            weights.w_fs * state.f_score,
            weights.w_ac * state.accuracy,
            weights.w_fa * math.exp(-state.false_alarm),
        )
    )


def state_key(state: DetectionMetrics) -> StateKey:
    """Discretize each metric at 0.1 resolution (11 bins, 1.0 included)."""
    return tuple(min(int(v * 10.0), 10) for v in state.as_tuple())  # type: ignore[return-value]


ZERO_STATE: StateKey = state_key(ZERO_METRICS)


def enumerate_actions(
    feature_family: Sequence[int],
    kinds: Sequence[ClassifierKind] = tuple(ClassifierKind),
) -> list[Action]:
    """Cartesian product of masks and classifier kinds, deterministic order."""
    if not feature_family:
        raise ValueError("feature family must be non-empty")
    if len(set(feature_family)) != len(feature_family):
        raise ValueError("duplicate mask in feature family")
    actions = [
        Action(mask, kind)
        for mask in sorted(feature_family)
        for kind in sorted(kinds, key=int)
    ]
    return actions


DEFAULT_CORE_FEATURES = (
    FeatureId.AVG_PKT_PER_FLOW,
    FeatureId.AVG_PKT_SIZE_PER_FLOW,
    FeatureId.PAIR_FLOW_PCT,
    FeatureId.PORT_GROWTH,
    FeatureId.TCP_FRACTION,
    FeatureId.FLOW_ENTROPY,
)


def default_mask_family(core: Sequence[FeatureId] = DEFAULT_CORE_FEATURES) -> list[int]:
    """Curated family: every subset of size 2..5 over the 6-feature core (56 masks)."""
    masks = []
    for size in range(2, 6):
        for combo in itertools.combinations(core, size):
            masks.append(sum(1 << int(f) for f in combo))
    return sorted(masks)


def q_update(q_old: float, r: float, alpha: float) -> float:
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    return q_old + alpha * (r - q_old)


class QTable:
    """Q values and visit counts per (discretized state, action index)."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        self._q: dict[StateKey, np.ndarray] = {}
        self._visits: dict[StateKey, np.ndarray] = {}

    def _row(self, key: StateKey) -> np.ndarray:
        row = self._q.get(key)
        if row is None:
            row = np.full(self.n_actions, np.nan)
            self._q[key] = row
            self._visits[key] = np.zeros(self.n_actions, dtype=int)
        return row

    def get(self, key: StateKey, idx: int) -> Optional[float]:
        row = self._q.get(key)
        if row is None or np.isnan(row[idx]):
            return None
        return float(row[idx])

    def set(self, key: StateKey, idx: int, q: float) -> None:
        self._row(key)[idx] = q
        self._visits[key][idx] += 1

    def visits(self, key: StateKey, idx: int) -> int:
        v = self._visits.get(key)
        return int(v[idx]) if v is not None else 0

    def effective_row(self, key: StateKey) -> np.ndarray:
        """Q values with unvisited pairs replaced by the optimistic initial value."""
        row = self._q.get(key)
        if row is None:
            return np.full(self.n_actions, OPTIMISTIC_Q)
        return np.where(np.isnan(row), OPTIMISTIC_Q, row)

    def entries(self) -> list[tuple[StateKey, int, float, int]]:
        out = []
        for key in sorted(self._q):
            row = self._q[key]
            vis = self._visits[key]
            for idx in range(self.n_actions):
                if not np.isnan(row[idx]):
                    out.append((key, idx, float(row[idx]), int(vis[idx])))
        return out

    def __len__(self) -> int:
        return len(self.entries())


def select_action(
    qtable: QTable,
    key: StateKey,
    actions: Sequence[Action],
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy index; greedy ties break to the lowest action index."""
    if not actions:
        raise ValueError("no actions to select from")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(len(actions)))
    return int(np.argmax(qtable.effective_row(key)))


@dataclass
class LearningConfig:
    alpha: float = 0.1
    epsilon: float = 0.3
    epsilon_decay: float = 0.95
    epsilon_floor: float = 0.05
    gamma: float = 0.0  # immediate-reward objective; must stay 0
    max_episodes: int = 300
    convergence_tol: float = 1e-3
    seed: int = 0
    k_folds: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.gamma != 0.0:
            raise ValueError("gamma is fixed to 0 (immediate reward only)")
        if self.max_episodes < 1:
            raise ValueError("max_episodes must be >= 1")


class EpisodeRecord(NamedTuple):
    episode: int
    iteration: int
    state: StateKey
    feature_mask: int
    kind: ClassifierKind
    reward: float
    q: float


@dataclass
class TrainingResult:
    qtable: QTable
    best_action: Action
    best_q: float
    best_metrics: DetectionMetrics
    log: list[EpisodeRecord]
    episodes_run: int
    converged: bool


Evaluator = Callable[[Action], DetectionMetrics]


def make_dataset_evaluator(
    X: np.ndarray,
    y: np.ndarray,
    k: int = 5,
    seed: int = 0,
    hp: Optional[Hyperparams] = None,
    train_seeds: Optional[dict[ClassifierKind, int]] = None,
) -> Evaluator:
    def evaluate(action: Action) -> DetectionMetrics:
        fit_seed = (train_seeds or {}).get(action.kind)
        return cross_validate(
            action.kind, action.feature_mask, X, y,
            k=k, seed=seed, hp=hp, train_seed=fit_seed,
        )

    return evaluate


def make_stub_evaluator(actions: Sequence[Action], seed: int = 0) -> tuple[Evaluator, dict[Action, DetectionMetrics]]:
    """Fixed synthetic metrics per action; the brute-force testing oracle."""
    rng = np.random.default_rng(seed)
    table = {
        a: DetectionMetrics(*[float(v) for v in rng.uniform(0.0, 1.0, size=5)])
        for a in actions
    }
    return (lambda action: table[action]), table


def run_training(
    actions: Sequence[Action],
    evaluate: Evaluator,
    weights: RewardWeights = RewardWeights(),
    cfg: LearningConfig = LearningConfig(),
) -> TrainingResult:
    """Episodic epsilon-greedy loop; each episode visits len(actions) iterations.

    Action evaluations are memoized: cross-validation is deterministic for a
    fixed seed, so re-evaluating an action cannot change the trace.
    """
    actions = list(actions)
    qtable = QTable(len(actions))
    rng = np.random.default_rng(cfg.seed)
    log: list[EpisodeRecord] = []
    cache: dict[Action, DetectionMetrics] = {}

    def observed(action: Action) -> DetectionMetrics:
        m = cache.get(action)
        if m is None:
            m = evaluate(action)
            cache[action] = m
        return m

    converged = False
    episodes_run = 0
    for ep in range(cfg.max_episodes):
        episodes_run = ep + 1
        eps = max(cfg.epsilon_floor, cfg.epsilon * cfg.epsilon_decay**ep)
        state = ZERO_STATE
        max_delta = 0.0
        for it in range(len(actions)):
            idx = select_action(qtable, state, actions, eps, rng)
            action = actions[idx]
            m = observed(action)
            r = reward(m, weights)
            old = qtable.get(state, idx)
            if old is None:
                # first visit seeds the entry at the observed reward; the
                # optimistic value only ever steers selection
                new = r
                delta = abs(r - OPTIMISTIC_Q)
            else:
                new = q_update(old, r, cfg.alpha)
                delta = abs(new - old)
            qtable.set(state, idx, new)
            log.append(EpisodeRecord(ep, it, state, action.feature_mask, action.kind, r, new))
            max_delta = max(max_delta, delta)
            state = state_key(m)
        if max_delta < cfg.convergence_tol:
            converged = True
            break

    best_key, best_idx, best_q = _global_argmax(qtable)
    best_action = actions[best_idx]
    return TrainingResult(
        qtable=qtable,
        best_action=best_action,
        best_q=best_q,
        best_metrics=cache[best_action],
        log=log,
        episodes_run=episodes_run,
        converged=converged,
    )


def _global_argmax(qtable: QTable) -> tuple[StateKey, int, float]:
    best: Optional[tuple[StateKey, int, float]] = None
    for key, idx, q, _ in qtable.entries():
        if best is None or q > best[2]:
            best = (key, idx, q)
    if best is None:
        raise ValueError("empty Q-table")
    return best


def optimal_policy(qtable: QTable, actions: Sequence[Action]) -> dict[StateKey, Action]:
    """Per-state argmax action over the visited table entries."""
    if len(qtable) == 0:
        raise ValueError("empty Q-table")
    policy: dict[StateKey, Action] = {}
    best_q: dict[StateKey, float] = {}
    for key, idx, q, _ in qtable.entries():
        if key not in policy or q > best_q[key]:
            policy[key] = actions[idx]
            best_q[key] = q
    return policy


def global_best(qtable: QTable, actions: Sequence[Action]) -> tuple[Action, float]:
    _, idx, q = _global_argmax(qtable)
    return actions[idx], q


# ------------------------------------------------------------- serialization

QTABLE_SCHEMA_VERSION = 1


def qtable_to_doc(qtable: QTable, actions: Sequence[Action]) -> dict:
    return {
        "schema_version": QTABLE_SCHEMA_VERSION,
        "n_actions": qtable.n_actions,
        "actions": [{"mask": a.feature_mask, "kind": a.kind.name} for a in actions],
        "entries": [
            {"state": list(key), "action": idx, "q": q, "visits": visits}
            for key, idx, q, visits in qtable.entries()
        ],
    }


def qtable_from_doc(doc: dict) -> tuple[QTable, list[Action]]:
    if doc.get("schema_version") != QTABLE_SCHEMA_VERSION:
        raise ValueError(f"unsupported q-table schema version {doc.get('schema_version')}")
    actions = [Action(a["mask"], ClassifierKind[a["kind"]]) for a in doc["actions"]]
    qtable = QTable(doc["n_actions"])
    for entry in doc["entries"]:
        key = tuple(entry["state"])
        qtable._row(key)[entry["action"]] = entry["q"]
        qtable._visits[key][entry["action"]] = entry["visits"]
    return qtable, actions


def write_episode_log(log: Sequence[EpisodeRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "iteration", "b_pr", "b_re", "b_fs", "b_ac", "b_fa", "mask", "kind", "reward", "q"])
        for rec in log:
            writer.writerow(
                [rec.episode, rec.iteration, *rec.state, rec.feature_mask, rec.kind.name, repr(rec.reward), repr(rec.q)]
            )


def save_qtable(qtable: QTable, actions: Sequence[Action], path) -> None:
    with open(path, "w") as fh:
        json.dump(qtable_to_doc(qtable, actions), fh, indent=1)
