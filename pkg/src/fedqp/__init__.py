"""Federated learning simulator with quadratic-programming-guided mutation."""

from .data import (
    ClientPartition,
    HeterogeneityReport,
    PartitionSpec,
    SyntheticSpec,
    generate,
    heterogeneity_report,
    partition,
    train_test_split,
)
from .engine import (
    EngineConfig,
    ExperimentData,
    RoundMetrics,
    ServerState,
    aggregate,
    compute_global_gradient,
    run_experiment,
    run_round,
    select_clients,
)
from .estimator import FederatedClassifier
from .models import (
    Batch,
    ModelSpec,
    TrainConfig,
    backward,
    evaluate,
    forward_loss,
    init_params,
    local_train,
    predict,
)
from .mutation import MutationConfig, QpResult, generate_raw_mutation, mutate_model, qp_correct
from .params import (
    LayeredParams,
    ShapeMismatchError,
    axpy,
    dot,
    load_params,
    norm_sq,
    save_params,
)
from .rng import RandomSource

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "ClientPartition",
    "EngineConfig",
    "ExperimentData",
    "FederatedClassifier",
    "HeterogeneityReport",
    "LayeredParams",
    "ModelSpec",
    "MutationConfig",
    "PartitionSpec",
    "QpResult",
    "RandomSource",
    "RoundMetrics",
    "ServerState",
    "ShapeMismatchError",
    "SyntheticSpec",
    "TrainConfig",
    "aggregate",
    "axpy",
    "backward",
    "compute_global_gradient",
    "dot",
    "evaluate",
    "forward_loss",
    "generate",
    "generate_raw_mutation",
    "heterogeneity_report",
    "init_params",
    "load_params",
    "local_train",
    "mutate_model",
    "norm_sq",
    "partition",
    "predict",
    "qp_correct",
    "run_experiment",
    "run_round",
    "save_params",
    "select_clients",
    "train_test_split",
]
