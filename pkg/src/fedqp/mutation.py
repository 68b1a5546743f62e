"""Stochastic per-layer model mutation with QP-based direction correction.

A raw mutation is a random per-layer perturbation scaled to the aggregation
gradient. The correction step projects it onto the halfspace of directions
making an acute angle with that gradient: minimize ||m~ - mut||^2 subject to
<m~, g> >= 0. The dual of this problem is a one-dimensional non-negative
quadratic, so the multiplier has the closed form

    lambda = max(0, -<mut, g> / <g, g>),      m~ = mut + lambda * g,

i.e. the corrected mutation is a conical combination of the raw mutation and
the gradient. The test suite validates this closed form against independent
iterative and grid-search solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import LayeredParams, ShapeMismatchError, as_vector, check_compatible, dot, norm_sq
from .rng import RandomSource

SIGNED_GRADIENT = "signed_gradient"
GAUSSIAN = "gaussian"
DISTRIBUTIONS = (SIGNED_GRADIENT, GAUSSIAN)

# Violations smaller than this relative margin count as feasible, which keeps
# the projection idempotent under floating-point re-evaluation.
_FEAS_MARGIN = 1e-10


@dataclass(frozen=True)
class MutationConfig:
    alpha: float = 1.0
    qp_probability: float = 0.5
    distribution: str = SIGNED_GRADIENT
    degenerate_eps: float = 1e-12

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0 <= self.qp_probability <= 1:
            raise ValueError("qp_probability must be in [0, 1]")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        if self.degenerate_eps <= 0:
            raise ValueError("degenerate_eps must be > 0")


@dataclass(frozen=True)
class QpResult:
    corrected: np.ndarray
    lam: float
    was_active: bool


def generate_raw_mutation(
    layer_grad: np.ndarray, cfg: MutationConfig, rng: RandomSource
) -> np.ndarray:
    """Random perturbation for one layer, scale matched to the gradient.

    signed_gradient: s * alpha * grad with s drawn uniformly from {+1, -1}
    (one uniform draw). gaussian: alpha * ||grad|| / sqrt(d) * z with z
    standard normal (d draws).
    """
    g = as_vector(layer_grad, "layer_grad")
    if cfg.distribution == SIGNED_GRADIENT:
        s = rng.sign()
        return (s * cfg.alpha) * g
    z = rng.normal(g.size)
    if g.size == 0:
        return np.asarray(z, dtype=np.float64).reshape(0)
    scale = cfg.alpha * np.sqrt(norm_sq(g)) / np.sqrt(g.size)
    return scale * z


def qp_correct(mut: np.ndarray, grad: np.ndarray, eps: float) -> QpResult:
    """Project a raw mutation into the halfspace aligned with the gradient.

    With g2 = <grad, grad>: if g2 < eps the gradient is degenerate and the
    mutation passes through untouched. Otherwise lambda = max(0, -<mut,g>/g2)
    and the result is mut + lambda*grad. Raw mutations already inside the
    halfspace (up to a small floating-point feasibility margin) are returned
    unchanged with lambda = 0.
    """
    m = as_vector(mut, "mut")
    g = as_vector(grad, "grad")
    if m.size != g.size:
        raise ShapeMismatchError(f"length mismatch: mut {m.size} vs grad {g.size}")
    g2 = norm_sq(g)
    if g2 < eps:
        return QpResult(m, 0.0, False)
    m2 = norm_sq(m)
    c = dot(m, g)
    # Relative margin: treat near-orthogonal violations (|cos| below the
    # margin) as feasible. Scales with the vectors, so genuine violations of
    # small-magnitude layers are still corrected.
    feas_tol = _FEAS_MARGIN * np.sqrt(m2 * g2)
    if c >= -feas_tol:
        return QpResult(m, 0.0, False)
    lam = -c / g2
    corrected = m + lam * g
    c2 = dot(corrected, g)
    if c2 < 0.0:
        # one refinement step absorbs the projection's rounding residue so
        # the constraint stays satisfied under re-evaluation
        bump = -c2 / g2
        corrected = corrected + bump * g
        lam += bump
    if norm_sq(corrected) <= (1e-12 * (np.sqrt(m2) + lam * np.sqrt(g2))) ** 2:
        # projection landed within cancellation noise of the origin
        corrected = np.zeros_like(corrected)
    return QpResult(corrected, lam, True)


def mutate_model(
    grad: LayeredParams,
    base: LayeredParams,
    cfg: MutationConfig,
    rng: RandomSource,
) -> tuple[LayeredParams, int]:
    """Build one mutated model: base + per-layer (optionally corrected) mutation.

    Per layer, in layer order: draw the raw mutation, then one uniform for
    the Bernoulli(qp_probability) decision of whether to apply the QP
    correction. Returns the mutated model and the number of layers where the
    correction constraint was active.
    """
    check_compatible(grad, base)
    layers = []
    activations = 0
    for (name, g), b in zip(grad.layers(), base.arrays):
        raw = generate_raw_mutation(g, cfg, rng)
        if rng.bernoulli(cfg.qp_probability):
            result = qp_correct(raw, g, cfg.degenerate_eps)
            if result.was_active:
                activations += 1
            mutated = result.corrected
        else:
            mutated = raw
        layers.append((name, b + mutated))
    return LayeredParams(layers), activations
