"""scikit-learn estimator wrapper around the federated engine.

``FederatedClassifier`` turns the simulation into a fit/predict classifier:
``fit(X, y)`` partitions the given samples across simulated clients, runs the
configured number of federated rounds, and keeps the final global model for
``predict``. Parameters follow the usual get_params/set_params protocol, so
the estimator composes with pipelines, grid search, and cross-validation.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import PartitionSpec, partition
from .engine import EngineConfig, ExperimentData, init_state, run_round
from .models import Batch, ModelSpec, TrainConfig, predict_logits
from .mutation import MutationConfig
from .rng import RandomSource


class FederatedClassifier(ClassifierMixin, BaseEstimator):
    """Classifier trained by simulated federated rounds.

    Parameters
    ----------
    strategy : {"fedavg", "fedmut", "fedqp"}
        Server-side update strategy.
    architecture : {"logreg", "mlp"}
        Local model family; ``hidden_dim`` applies to the MLP only.
    num_rounds, num_devices, clients_per_round : int
        Federated round count, simulated device count, and per-round
        participation.
    qp_probability : float
        Per-layer chance that a raw mutation is QP-corrected (fedqp only).
    mutation_scale : float
        Mutation radius relative to the global gradient magnitude.
    mutation_distribution : {"signed_gradient", "gaussian"}
    mutation_base : {"global", "local"}
        Whether mutations are added to the aggregated global model or to each
        slot's locally trained model.
    partition_mode : {"iid", "dirichlet"}
        How the training samples are spread across simulated clients;
        ``beta`` is the Dirichlet concentration.
    learning_rate, momentum, batch_size, local_epochs
        Local SGD settings.
    aggregation_weighting : {"uniform", "by_sample_count"}
    random_state : int
        Seed for every stream of the simulation.

    Attributes
    ----------
    classes_ : ndarray
        Sorted unique labels seen in fit.
    params_ : LayeredParams
        Final global model.
    history_ : list[RoundMetrics]
        Per-round metrics; accuracy is measured on the fit data.
    """

    def __init__(
        self,
        strategy="fedqp",
        architecture="mlp",
        hidden_dim=32,
        num_rounds=20,
        num_devices=10,
        clients_per_round=5,
        qp_probability=0.5,
        mutation_scale=1.0,
        mutation_distribution="signed_gradient",
        mutation_base="global",
        partition_mode="iid",
        beta=0.5,
        learning_rate=0.01,
        momentum=0.5,
        batch_size=50,
        local_epochs=5,
        aggregation_weighting="uniform",
        random_state=0,
    ):
        self.strategy = strategy
        self.architecture = architecture
        self.hidden_dim = hidden_dim
        self.num_rounds = num_rounds
        self.num_devices = num_devices
        self.clients_per_round = clients_per_round
        self.qp_probability = qp_probability
        self.mutation_scale = mutation_scale
        self.mutation_distribution = mutation_distribution
        self.mutation_base = mutation_base
        self.partition_mode = partition_mode
        self.beta = beta
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.local_epochs = local_epochs
        self.aggregation_weighting = aggregation_weighting
        self.random_state = random_state

    def _engine_config(self) -> EngineConfig:
        return EngineConfig(
            num_rounds=self.num_rounds,
            num_devices=self.num_devices,
            clients_per_round=self.clients_per_round,
            strategy=self.strategy,
            mutation=MutationConfig(
                alpha=self.mutation_scale,
                qp_probability=self.qp_probability,
                distribution=self.mutation_distribution,
            ),
            train=TrainConfig(
                learning_rate=self.learning_rate,
                momentum=self.momentum,
                batch_size=self.batch_size,
                local_epochs=self.local_epochs,
            ),
            seed=self.random_state,
            aggregation_weighting=self.aggregation_weighting,
            mutation_base=self.mutation_base,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need at least two classes to fit")
        self.n_features_in_ = X.shape[1]

        cfg = self._engine_config()
        spec = ModelSpec(
            architecture=self.architecture,
            input_dim=X.shape[1],
            num_classes=self.classes_.size,
            hidden_dim=self.hidden_dim if self.architecture == "mlp" else 0,
        )
        part_rng = RandomSource(cfg.seed, "estimator/partition")
        part = partition(
            y_idx,
            PartitionSpec(
                num_clients=self.num_devices,
                mode=self.partition_mode,
                beta=self.beta,
            ),
            part_rng,
        )
        train = Batch(X, y_idx)
        data = ExperimentData(train=train, partition=part, test=train)
        root = RandomSource(cfg.seed)
        state = init_state(spec, cfg, root)
        for _ in range(cfg.num_rounds):
            state = run_round(state, cfg, data, root)
        self.params_ = state.w_g_current
        self.history_ = state.metrics_log
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return predict_logits(self.params_, X)

    def predict_proba(self, X):
        logits = self.decision_function(X)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[np.argmax(logits, axis=1)]
