"""The federated round loop: selection, dispatch, local training, aggregation,
global-gradient computation, and strategy-dependent model-pool updates.

Strategies:

* ``fedavg`` — dispatch the global model to every selected client.
* ``fedmut`` — maintain a pool of K mutated models (pure stochastic mutation).
* ``fedqp``  — same pool, but each layer's mutation is QP-corrected with
  probability ``qp_probability``.

All randomness flows through independent hash-derived streams keyed by round and role
("round/{r}/select", ".../dispatch", ".../client/{i}", ".../mutate/{j}"), so
strategies consume exactly the draws they need without shifting anyone
else's stream. That is what makes the reduction identities hold bitwise:
fedqp with alpha=0 reproduces fedavg, and fedqp with p=0 reproduces fedmut.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import ClientPartition
from .models import (
    Batch,
    ModelSpec,
    TrainConfig,
    evaluate,
    forward_loss,
    init_params,
    local_train,
)
from .mutation import MutationConfig, mutate_model
from .params import LayeredParams, check_compatible, params_norm, subtract
from .rng import RandomSource

FEDAVG = "fedavg"
FEDMUT = "fedmut"
FEDQP = "fedqp"
STRATEGIES = (FEDAVG, FEDMUT, FEDQP)

UNIFORM = "uniform"
BY_SAMPLE_COUNT = "by_sample_count"
WEIGHTINGS = (UNIFORM, BY_SAMPLE_COUNT)

BASE_GLOBAL = "global"
BASE_LOCAL = "local"
MUTATION_BASES = (BASE_GLOBAL, BASE_LOCAL)


@dataclass(frozen=True)
class EngineConfig:
    num_rounds: int = 100
    num_devices: int = 100
    clients_per_round: int = 10
    strategy: str = FEDQP
    mutation: MutationConfig = field(default_factory=MutationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    aggregation_weighting: str = UNIFORM
    mutation_base: str = BASE_GLOBAL

    def __post_init__(self):
        # num_rounds 0 is allowed as the degenerate "no training" case
        if self.num_rounds < 0:
            raise ValueError("num_rounds must be >= 0")
        if self.num_devices < 1:
            raise ValueError("num_devices must be >= 1")
        if not 1 <= self.clients_per_round <= self.num_devices:
            raise ValueError("clients_per_round must be in [1, num_devices]")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.aggregation_weighting not in WEIGHTINGS:
            raise ValueError(f"aggregation_weighting must be one of {WEIGHTINGS}")
        if self.mutation_base not in MUTATION_BASES:
            raise ValueError(f"mutation_base must be one of {MUTATION_BASES}")


@dataclass
class RoundMetrics:
    round: int
    test_accuracy: float
    mean_train_loss: float
    global_grad_norm: float
    qp_activations: int
    wall_ms: int

    def deterministic_fields(self) -> tuple:
        """Everything except wall time, which is observability only."""
        return (
            self.round,
            self.test_accuracy,
            self.mean_train_loss,
            self.global_grad_norm,
            self.qp_activations,
        )


@dataclass
class ServerState:
    round: int
    w_g_current: LayeredParams
    w_g_previous: LayeredParams
    pool: list[LayeredParams]
    metrics_log: list[RoundMetrics] = field(default_factory=list)


@dataclass(frozen=True)
class ExperimentData:
    """A partitioned training set plus a held-out global test set."""

    train: Batch
    partition: ClientPartition
    test: Batch

    def __post_init__(self):
        covered = np.sort(np.concatenate(self.partition.assignments))
        if covered.size != len(self.train) or not np.array_equal(
            covered, np.arange(len(self.train))
        ):
            raise ValueError("partition does not cover the training set exactly")

    def client_batch(self, client_id: int) -> Batch:
        return self.train.subset(self.partition.assignments[client_id])


def select_clients(num_devices: int, k: int, rng: RandomSource) -> np.ndarray:
    """K distinct uniform ids, sorted ascending for deterministic dispatch."""
    if k > num_devices:
        raise ValueError(f"cannot select {k} clients from {num_devices} devices")
    chosen = rng.choice_without_replacement(num_devices, k)
    return np.sort(chosen)


def aggregate(models: list[LayeredParams], weights) -> LayeredParams:
    """Layer-wise weighted mean, weights normalized to sum 1.

    Computed as m0 + sum_i w_i * (m_i - m0) with a fixed index order, which
    makes aggregation of identical models exact and keeps every coordinate
    inside the convex hull of the inputs up to rounding.
    """
    if not models:
        raise ValueError("cannot aggregate an empty model list")
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size != len(models):
        raise ValueError(f"need one weight per model, got {w.size} for {len(models)}")
    if (w < 0).any():
        raise ValueError("weights must be non-negative")
    total = float(w.sum())
    if total <= 0:
        raise ValueError("weights must sum to a positive value")
    for m in models[1:]:
        check_compatible(models[0], m)
    w = w / total
    base = models[0]
    acc = [np.zeros(a.size) for a in base.arrays]
    for wi, model in zip(w.tolist(), models):
        if model is base:
            continue
        for a, am, ab in zip(acc, model.arrays, base.arrays):
            a += wi * (am - ab)
    return LayeredParams(
        (name, ab + a) for (name, ab), a in zip(base.layers(), acc)
    )


def compute_global_gradient(
    w_new: LayeredParams, w_old: LayeredParams
) -> LayeredParams:
    """Round-over-round displacement of the global model, w_new - w_old."""
    return subtract(w_new, w_old)


def init_state(model_spec: ModelSpec, cfg: EngineConfig, root: RandomSource) -> ServerState:
    """Round-zero state: fresh global model; pool entries all equal it."""
    w0 = init_params(model_spec, root.derive("init"))
    pool = [w0] * cfg.clients_per_round if cfg.strategy != FEDAVG else []
    return ServerState(round=0, w_g_current=w0, w_g_previous=w0, pool=pool)


def run_round(
    state: ServerState,
    cfg: EngineConfig,
    data: ExperimentData,
    root: RandomSource,
) -> ServerState:
    """One full round. Step order: select clients, dispatch (the pool order is
    shuffled once per round for mutation strategies), train locally, aggregate,
    compute the global gradient, regenerate the pool, roll the global models,
    evaluate."""
    t0 = time.perf_counter()
    r = state.round + 1
    k = cfg.clients_per_round
    selected = select_clients(cfg.num_devices, k, root.derive(f"round/{r}/select"))

    if cfg.strategy == FEDAVG:
        dispatched = [state.w_g_current] * k
    else:
        order = root.derive(f"round/{r}/dispatch").permutation(k)
        dispatched = [state.pool[j] for j in order.tolist()]

    trained: list[LayeredParams] = []
    losses: list[float] = []
    sizes: list[int] = []
    for i, client_id in enumerate(selected.tolist()):
        batch = data.client_batch(client_id)
        stream = root.derive(f"round/{r}/client/{i}")
        w_i = local_train(dispatched[i], batch, cfg.train, stream)
        trained.append(w_i)
        losses.append(forward_loss(w_i, batch)[0])
        sizes.append(len(batch))

    if cfg.aggregation_weighting == BY_SAMPLE_COUNT:
        weights = [float(s) for s in sizes]
    else:
        weights = [1.0] * k
    w_new = aggregate(trained, weights)
    w_delta = compute_global_gradient(w_new, state.w_g_current)

    qp_activations = 0
    if cfg.strategy != FEDAVG:
        qp_prob = cfg.mutation.qp_probability if cfg.strategy == FEDQP else 0.0
        mut_cfg = replace(cfg.mutation, qp_probability=qp_prob)
        new_pool: list[LayeredParams] = []
        for j in range(k):
            base = w_new if cfg.mutation_base == BASE_GLOBAL else trained[j]
            mutated, n_active = mutate_model(
                w_delta, base, mut_cfg, root.derive(f"round/{r}/mutate/{j}")
            )
            new_pool.append(mutated)
            qp_activations += n_active
        state.pool = new_pool

    state.w_g_previous = state.w_g_current
    state.w_g_current = w_new
    state.round = r

    accuracy = evaluate(w_new, data.test)
    wall_ms = int(round((time.perf_counter() - t0) * 1000))
    state.metrics_log.append(
        RoundMetrics(
            round=r,
            test_accuracy=accuracy,
            mean_train_loss=sum(losses) / len(losses),
            global_grad_norm=params_norm(w_delta),
            qp_activations=qp_activations,
            wall_ms=wall_ms,
        )
    )
    return state


def run_experiment(
    cfg: EngineConfig, model_spec: ModelSpec, data: ExperimentData
) -> list[RoundMetrics]:
    """Run cfg.num_rounds rounds from a fresh state; returns the metrics log.

    A pure function of (cfg, model_spec, data): repeated calls produce
    identical logs up to wall-clock timings.
    """
    root = RandomSource(cfg.seed)
    state = init_state(model_spec, cfg, root)
    for _ in range(cfg.num_rounds):
        state = run_round(state, cfg, data, root)
    return state.metrics_log
