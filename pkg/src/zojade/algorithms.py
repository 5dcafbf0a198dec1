"""Synchronous multi-agent iterations: curvature-tracking Jacobi descent
and two gradient-estimate baselines.

All three algorithms share the consensus matrix and the finite-difference
oracle code path, and advance synchronously: every agent's update at step
t reads only neighbor values from step t-1.  State is stored stacked,
one row per agent.

The main update combines consensus on the iterates with tracked
numerator/denominator statistics of a per-coordinate parabola model:

    g_i(t) = hdiag_i(t) * x_i(t-1) - grad_i(t)      (local parabola stats)
    h_i(t) = hdiag_i(t)
    y_i(t) = sum_j p_ij [ y_j(t-1) + g_j(t) - g_j(t-1) ]
    z_i(t) = sum_j p_ij [ z_j(t-1) + h_j(t) - h_j(t-1) ]
    x_i(t) = (1 - eps) sum_j p_ij x_j(t-1) + eps * y_i(t) / z_i(t)

with y, z, g, h all starting at zero, so the node sums of y and z equal
those of g and h at every step.  The division is guarded by a
configurable floor on z; activations are counted and reported, and on
well-conditioned strongly convex problems the counter stays at zero.

Note: the curvature estimate is taken at each agent's own iterate
x_i(t-1) (the same point the gradient estimate uses), which is the only
reading under which g and h describe one parabola fit per agent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EvaluationError, RunAborted
from .graphs import ConsensusMatrix
from .metrics import RunTrace, TraceRow, ef_mode, loss_metric
from .objectives import ProblemInstance
from .oracle import estimate_both, estimate_gradient
from .rng import Xoshiro256


@dataclass
class AgentState:
    """One agent's view: iterate, parabola stats, and tracked averages."""

    x: np.ndarray
    g: np.ndarray
    h: np.ndarray
    y: np.ndarray
    z: np.ndarray


@dataclass
class NetworkState:
    """Stacked agent states (rows are agents) plus run counters."""

    x: np.ndarray
    g: np.ndarray
    h: np.ndarray
    y: np.ndarray
    z: np.ndarray
    P: ConsensusMatrix
    iteration: int = 0
    total_queries: int = 0
    clamp_count: int = 0

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def agents(self) -> list:
        return [
            AgentState(self.x[i], self.g[i], self.h[i], self.y[i], self.z[i])
            for i in range(self.n)
        ]

    def x_mean(self) -> np.ndarray:
        """Network mean of the iterates."""
        return self.x.mean(axis=0)

    def x_disp(self) -> np.ndarray:
        """Per-agent displacement from the mean iterate."""
        return self.x - self.x_mean()

    def consensus_error(self) -> float:
        return float(np.linalg.norm(self.x_disp()))

    def tracking_residuals(self) -> tuple:
        """Relative conservation residuals of (y vs g) and (z vs h) node sums."""
        return (
            _relative_residual(self.y.sum(axis=0), self.g.sum(axis=0)),
            _relative_residual(self.z.sum(axis=0), self.h.sum(axis=0)),
        )


def _relative_residual(tracked_sum: np.ndarray, signal_sum: np.ndarray) -> float:
    num = float(np.max(np.abs(tracked_sum - signal_sum)))
    if num == 0.0:
        return 0.0
    den = float(np.max(np.abs(signal_sum)))
    return num / max(den, 1e-300)


def initial_state(x0: np.ndarray, P: ConsensusMatrix) -> NetworkState:
    """Zero-initialized tracking state around the given iterates."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 2 or x0.shape[0] != P.n:
        raise ConfigurationError(f"x0 must be (n, d) with n={P.n}, got {x0.shape}")
    zeros = np.zeros_like(x0)
    return NetworkState(
        x=x0.copy(), g=zeros.copy(), h=zeros.copy(), y=zeros.copy(), z=zeros.copy(), P=P
    )


@dataclass
class JadeConfig:
    """Parameters of the curvature-tracking update.

    epsilon is the convex-combination weight of the local Newton-type
    target; the convergence theory needs it small, and epsilon = 1 is the
    degenerate pure-jump variant (useful in single-agent sanity checks).
    mu is the absolute finite-difference step.  z entries are clamped
    below at z_floor before dividing.
    """

    mu: float
    epsilon: float = 0.05
    z_floor: float = 1e-8
    budget: int = 10_000
    record_every: int = 10
    x0_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if self.mu <= 0.0:
            raise ConfigurationError(f"mu must be positive, got {self.mu}")
        if self.z_floor <= 0.0:
            raise ConfigurationError(f"z_floor must be positive, got {self.z_floor}")


@dataclass
class BaselineConfig:
    """Parameters of the gradient-estimate baselines (step size eta)."""

    mu: float
    eta: float = 0.1
    budget: int = 10_000
    record_every: int = 10
    x0_scale: float = 1.0

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ConfigurationError(f"mu must be positive, got {self.mu}")
        if self.eta < 0.0:
            raise ConfigurationError(f"eta must be nonnegative, got {self.eta}")


def _check_finite_update(x_new: np.ndarray, iteration: int) -> None:
    if np.isfinite(x_new).all():
        return
    bad = np.argwhere(~np.isfinite(x_new))[0]
    i, k = int(bad[0]), int(bad[1])
    raise RunAborted(
        f"non-finite iterate at step {iteration}: agent {i}, coordinate {k} "
        f"became {x_new[i, k]!r}"
    )


def jade_step(state: NetworkState, instance: ProblemInstance, cfg: JadeConfig) -> NetworkState:
    """One synchronous round of the curvature-tracking Jacobi update."""
    n, d = state.x.shape
    P = state.P.weights
    grads = np.empty((n, d))
    hdiags = np.empty((n, d))
    for i, obj in enumerate(instance.objectives):
        out = estimate_both(obj, state.x[i], cfg.mu)
        grads[i] = out.grad_estimate
        hdiags[i] = out.hessian_diag_estimate
    g_new = hdiags * state.x - grads
    h_new = hdiags
    y_new = P @ (state.y + g_new - state.g)
    z_new = P @ (state.z + h_new - state.h)
    clamped = int(np.count_nonzero(z_new < cfg.z_floor))
    z_safe = np.maximum(z_new, cfg.z_floor)
    x_new = (1.0 - cfg.epsilon) * (P @ state.x) + cfg.epsilon * (y_new / z_safe)
    _check_finite_update(x_new, state.iteration + 1)
    return NetworkState(
        x=x_new,
        g=g_new,
        h=h_new,
        y=y_new,
        z=z_new,
        P=state.P,
        iteration=state.iteration + 1,
        total_queries=state.total_queries + n * (2 * d + 1),
        clamp_count=state.clamp_count + clamped,
    )


def gradient_tracking_step(
    state: NetworkState, instance: ProblemInstance, cfg: BaselineConfig
) -> NetworkState:
    """Consensus + tracked-average gradient step (generic tracking baseline)."""
    n, d = state.x.shape
    P = state.P.weights
    grads = np.empty((n, d))
    for i, obj in enumerate(instance.objectives):
        grads[i] = estimate_gradient(obj, state.x[i], cfg.mu)
    y_new = P @ (state.y + grads - state.g)
    x_new = P @ state.x - cfg.eta * y_new
    _check_finite_update(x_new, state.iteration + 1)
    return NetworkState(
        x=x_new,
        g=grads,
        h=state.h,
        y=y_new,
        z=state.z,
        P=state.P,
        iteration=state.iteration + 1,
        total_queries=state.total_queries + n * 2 * d,
        clamp_count=state.clamp_count,
    )


def consensus_gd_step(
    state: NetworkState, instance: ProblemInstance, cfg: BaselineConfig
) -> NetworkState:
    """Plain consensus plus a local gradient-estimate step (naive baseline)."""
    n, d = state.x.shape
    P = state.P.weights
    grads = np.empty((n, d))
    for i, obj in enumerate(instance.objectives):
        grads[i] = estimate_gradient(obj, state.x[i], cfg.mu)
    x_new = P @ state.x - cfg.eta * grads
    _check_finite_update(x_new, state.iteration + 1)
    return NetworkState(
        x=x_new,
        g=state.g,
        h=state.h,
        y=state.y,
        z=state.z,
        P=state.P,
        iteration=state.iteration + 1,
        total_queries=state.total_queries + n * 2 * d,
        clamp_count=state.clamp_count,
    )


#: name -> (step function, per-agent queries per iteration as a function of d)
ALGORITHMS = {
    "zo_jade": (jade_step, lambda d: 2 * d + 1),
    "gradient_tracking": (gradient_tracking_step, lambda d: 2 * d),
    "consensus_gd": (consensus_gd_step, lambda d: 2 * d),
}


def draw_initial_iterates(seed: int, n: int, d: int, scale: float) -> np.ndarray:
    """Seeded initial iterates; identical for every algorithm run on this seed."""
    return scale * Xoshiro256(seed).normals(n, d)


def run(
    algorithm: str,
    instance: ProblemInstance,
    P: ConsensusMatrix,
    cfg,
    seed: int,
    label: str = "",
) -> RunTrace:
    """Run one algorithm until the per-agent query budget is exhausted.

    A trace row is recorded at step 0, every `record_every` iterations,
    and at the final iteration.  The run is deterministic given
    (instance, seed); a non-finite update stops it early and marks the
    trace as failed with the abort diagnostic.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(
            f"unknown algorithm '{algorithm}'; expected one of {sorted(ALGORITHMS)}"
        )
    if cfg.budget <= 0:
        raise ConfigurationError(f"query budget must be positive, got {cfg.budget}")
    if P.n != instance.n:
        raise ConfigurationError(
            f"consensus matrix is {P.n}x{P.n} but the instance has {instance.n} agents"
        )
    step_fn, cost_fn = ALGORITHMS[algorithm]
    inst = instance.fresh()
    per_step = cost_fn(inst.d)
    x0 = draw_initial_iterates(seed, inst.n, inst.d, cfg.x0_scale)
    state = initial_state(x0, P)

    trace = RunTrace(
        algorithm=algorithm,
        seed=seed,
        label=label or algorithm,
        ef_mode=ef_mode(inst),
        queries_per_iteration=per_step,
    )

    def record():
        ry, rz = state.tracking_residuals()
        trace.rows.append(
            TraceRow(
                iteration=state.iteration,
                queries_per_agent=state.iteration * per_step,
                e_f=loss_metric(inst, state.x),
                consensus_error=state.consensus_error(),
                tracking_residual_y=ry,
                tracking_residual_z=rz,
                clamp_count=state.clamp_count,
            )
        )

    record()
    try:
        while (state.iteration + 1) * per_step <= cfg.budget:
            state = step_fn(state, inst, cfg)
            if state.iteration % cfg.record_every == 0:
                record()
    except (RunAborted, EvaluationError) as exc:
        trace.failed = True
        trace.diagnostic = str(exc)
    if trace.rows[-1].iteration != state.iteration:
        record()
    trace.final_x = state.x.copy()
    return trace
