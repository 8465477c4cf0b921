"""Shared fixtures: frozen scenarios, the desk dataset and a reference model."""
import numpy as np
import pytest

from qmind.classifiers import ClassifierKind, train
from qmind.dataplane import ServerConfig
from qmind.features import build_dataset, dataset_arrays, project
from qmind.runtime import DataplaneConfig, METHOD_NONE, run_simulation
from qmind.traffic import AttackerConfig, BenignClientConfig, Scenario, ground_truth

DESK_TRAFFIC_SEED = 42

# avg-pkt-per-flow | avg-pkt-size | pair-flow-pct
RUNTIME_MASK = (1 << 0) | (1 << 1) | (1 << 5)


def desk_scenario() -> Scenario:
    """Training scenario: 4 benign clients + 4 ON-OFF attackers, 500 s."""
    benign = [
        BenignClientConfig(f"10.0.1.{i + 1}", rate, 2.0, [80, 443, 8080], 0.9)
        for i, rate in enumerate([2.0, 2.5, 3.0, 3.5])
    ]
    attackers = [
        AttackerConfig(f"10.0.2.{i + 1}", rate, 15.0, 5.0, 4.0)
        for i, rate in enumerate([3.0, 5.0, 8.0, 12.0])
    ]
    return Scenario(benign=benign, attackers=attackers, duration=500.0)


def mitigation_scenario() -> Scenario:
    """Runtime scenario: same population shape, 60 s, sized to overflow a 400-rule table."""
    benign = [
        BenignClientConfig(f"10.0.1.{i + 1}", 1.5, 2.0, [80, 443, 8080], 0.9)
        for i in range(4)
    ]
    attackers = [AttackerConfig(f"10.0.2.{i + 1}", 8.0, 20.0, 5.0, 4.0) for i in range(4)]
    return Scenario(benign=benign, attackers=attackers, duration=60.0)


def mitigation_dataplane() -> DataplaneConfig:
    return DataplaneConfig(capacity=400, idle_timeout=10.0)


def mitigation_server() -> ServerConfig:
    return ServerConfig(slot_capacity=150, hold_duration=60.0, service_duration=1.0)


@pytest.fixture(scope="session")
def desk_dataset():
    """(samples, X, y) extracted from one undefended run of the desk scenario."""
    scenario = desk_scenario()
    log = run_simulation(
        scenario,
        DataplaneConfig(capacity=50000, idle_timeout=10.0),
        ServerConfig(slot_capacity=100000),
        method=METHOD_NONE,
        collection_period=5.0,
        traffic_seed=DESK_TRAFFIC_SEED,
    )
    samples = build_dataset(log.snapshots, ground_truth(scenario))
    X, y = dataset_arrays(samples)
    return samples, X, y


@pytest.fixture(scope="session")
def runtime_model(desk_dataset):
    """Random forest on the runtime mask, fitted on the full desk dataset."""
    _, X, y = desk_dataset
    return train(ClassifierKind.RF, project(X, RUNTIME_MASK), y, seed=7)
