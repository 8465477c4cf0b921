"""Desk-scale lab for stealthy low-rate DoS defense in SDN.

Pipeline: simulate switch + server under ON-OFF attack, extract per-source
features, pick the best (feature subset, classifier) pair with tabular
Q-learning, then run the detector in a closed mitigation loop.
"""

__version__ = "0.1.0"

from .classifiers import ClassifierKind, TrainedModel, predict, train
from .dataplane import FlowKey, ForwardResult, ServerModel, StatsSnapshot, Switch
from .evaluation import ConfusionMatrix, DetectionMetrics, cross_validate, metrics
from .features import FeatureId, FeatureVector, LabeledSample, build_dataset, extract, project
from .qlearning import Action, LearningConfig, QTable, RewardWeights, reward, run_training
from .runtime import DefenseConfig, MitigationPolicy, SiftConfig, measure, run_simulation
from .traffic import AttackerConfig, BenignClientConfig, Label, Scenario, generate_timeline, ground_truth

__all__ = [
    "Action",
    "AttackerConfig",
    "BenignClientConfig",
    "ClassifierKind",
    "ConfusionMatrix",
    "DefenseConfig",
    "DetectionMetrics",
    "FeatureId",
    "FeatureVector",
    "FlowKey",
    "ForwardResult",
    "Label",
    "LabeledSample",
    "LearningConfig",
    "MitigationPolicy",
    "QTable",
    "RewardWeights",
    "Scenario",
    "ServerModel",
    "SiftConfig",
    "StatsSnapshot",
    "Switch",
    "TrainedModel",
    "build_dataset",
    "cross_validate",
    "extract",
    "generate_timeline",
    "ground_truth",
    "measure",
    "metrics",
    "predict",
    "project",
    "reward",
    "run_simulation",
    "run_training",
    "train",
]
