"""Width-independent packing solver with per-regime update rules.

Three update regimes share one loop: a mirror step driven by an
accumulated dual state for fairness below 1, an additive step at exactly 1,
and a multiplicative step above 1. Feasibility of every iterate is a hard
invariant and is re-checked whenever loads are computed.

The per-branch update expressions, the trace bookkeeping and the solution
finalization live in small shared helpers that the distributed round engine
reuses verbatim; keeping a single floating-point path is what makes the two
engines bit-identical.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DualDomainError,
    FeasibilityViolation,
    InvalidAlpha,
    NegativeCoordinate,
)
from .matrix import column_loads, constraint_loads
from .problem import PackingInstance, ScalingRecord, SolverConfig, f_alpha_value
from .regularization import GradientKernel, PackingRegParams, derive_packing_params

TRACE_CAPACITY = 4096


class ComplementarySlacknessWarning(UserWarning):
    """Dual multiplier mass drifted off the tight constraints past burn-in."""


@dataclass(frozen=True)
class TraceRow:
    k: int
    utility: float
    max_load: float
    f_r: float
    gap: float | None = None


class TraceBuffer:
    """Bounded trace storage; oldest rows are dropped past capacity."""

    def __init__(self, capacity: int = TRACE_CAPACITY):
        self._rows = deque(maxlen=capacity)

    def append(self, row: TraceRow) -> None:
        self._rows.append(row)

    def rows(self) -> list[TraceRow]:
        return list(self._rows)

    def __len__(self) -> int:
        return len(self._rows)


@dataclass(eq=False)
class PackingState:
    x_hat: np.ndarray
    z: np.ndarray | None
    u: np.ndarray
    k: int
    trace: TraceBuffer = field(default_factory=TraceBuffer)
    kernel: GradientKernel | None = None


@dataclass(eq=False)
class PackingSolution:
    x: np.ndarray
    utility: float
    eps_f: float
    eps_f_form: str
    iterations_run: int
    max_load: float
    is_feasible: bool
    dual_certificate: np.ndarray | None
    gap_estimate: float | None
    trace: list[TraceRow]
    params: PackingRegParams
    stopped_early: bool = False


@dataclass(frozen=True)
class FeasibilityReport:
    max_load: float
    violated_rows: list[int]
    is_feasible: bool


# ---- branch step scales and update expressions (shared with the round engine) ----

def mirror_step_scale(params) -> float:
    return params.epsilon * params.h


def additive_step_scale(params: PackingRegParams) -> float:
    return params.beta / (4.0 * (1.0 + params.beta))


def multiplicative_step_scale(params: PackingRegParams, alpha: float) -> float:
    return params.beta * (1.0 - alpha) / (4.0 * (1.0 + alpha * params.beta))


def mirror_iterate(z, beta_prime: float):
    return np.power(1.0 + z, -1.0 / beta_prime)


def mirror_update(z, truncated, eh: float):
    return z + eh * truncated


def additive_update(x_hat, truncated, c: float):
    return x_hat - c * truncated


def multiplicative_update(x_hat, truncated, c: float):
    return (1.0 - c * truncated) * x_hat


def init_packing(instance: PackingInstance, config: SolverConfig,
                 params: PackingRegParams | None = None) -> PackingState:
    """Initial state: allocation (1 - eps)/(n rho) on every coordinate.

    For fairness below 1 the mirror state starts at z_j = x_hat_j**(-b') - 1,
    which makes the first mirror recomputation reproduce the initial iterate.
    """
    alpha = config.alpha
    if params is None:
        params = derive_packing_params(instance.m, instance.n, instance.rho, alpha, config.epsilon)
    n = instance.n
    u0 = np.full(n, (1.0 - config.epsilon) / (n * instance.rho))
    if alpha == 1.0:
        x_hat = np.log(u0)
    else:
        x_hat = np.power(u0, 1.0 - alpha)
    z = None
    if alpha < 1.0:
        z = np.power(x_hat, -params.beta_prime) - 1.0
    kernel = GradientKernel(instance.matrix, alpha, params.beta, params.logC)
    u = kernel.allocation(x_hat)
    return PackingState(x_hat=x_hat, z=z, u=u, k=0, kernel=kernel)


def _require_feasible(loads: np.ndarray, k: int) -> None:
    if float(loads.max()) > 1.0:
        raise FeasibilityViolation(
            f"constraint load {float(loads.max())} exceeded 1 at iteration {k}; "
            "this indicates an implementation bug"
        )


def step(state: PackingState, instance: PackingInstance, params: PackingRegParams,
         alpha: float, check_feasibility: bool = True) -> PackingState:
    """Advance one iteration of the matching fairness branch, in place."""
    kernel = state.kernel
    if kernel is None:
        kernel = GradientKernel(instance.matrix, alpha, params.beta, params.logC)
        state.kernel = kernel

    if alpha < 1.0:
        x_hat = mirror_iterate(state.z, params.beta_prime)
        u = kernel.allocation(x_hat)
        loads = kernel.loads_of(u)
        if check_feasibility:
            _require_feasible(loads, state.k + 1)
        pair = kernel.evaluate(x_hat, u=u, loads=loads)
        state.z = mirror_update(state.z, pair.truncated, mirror_step_scale(params))
        state.x_hat = x_hat
        state.u = u
    elif alpha == 1.0:
        pair = kernel.evaluate(state.x_hat, u=state.u)
        if check_feasibility:
            _require_feasible(pair.loads, state.k)
        state.x_hat = additive_update(state.x_hat, pair.truncated, additive_step_scale(params))
        state.u = np.exp(state.x_hat)
    else:
        pair = kernel.evaluate(state.x_hat, u=state.u)
        if check_feasibility:
            _require_feasible(pair.loads, state.k)
        state.x_hat = multiplicative_update(
            state.x_hat, pair.truncated, multiplicative_step_scale(params, alpha)
        )
        state.u = np.power(state.x_hat, 1.0 / (1.0 - alpha))
    state.k += 1
    return state


def feasibility_report(instance: PackingInstance, x) -> FeasibilityReport:
    """Exact loads of an allocation; feasibility means max load <= 1, no slack."""
    x = np.asarray(x, dtype=np.float64)
    if (x < 0.0).any():
        raise NegativeCoordinate("allocation must be nonnegative")
    loads = constraint_loads(instance.matrix, x)
    violated = [int(i) for i in np.flatnonzero(loads > 1.0)]
    return FeasibilityReport(
        max_load=float(loads.max()), violated_rows=violated, is_feasible=not violated
    )


def dual_vector(kernel: GradientKernel, log_loads: np.ndarray) -> np.ndarray:
    """Barrier-weight multiplier estimates; rows with zero load give 0."""
    return np.exp(kernel.logC + kernel.inv_beta * log_loads)


def _dual_value(kernel: GradientKernel, instance: PackingInstance, alpha: float,
                y: np.ndarray) -> float:
    aty = column_loads(instance.matrix, y)
    if (aty == 0.0).any():
        raise DualDomainError("a column receives zero dual mass; gap undefined")
    return -float(np.add.reduce(y)) - (alpha / (1.0 - alpha)) * float(
        np.add.reduce(np.power(aty, -(1.0 - alpha) / alpha))
    )


def packing_duality_gap(instance: PackingInstance, x_hat, params: PackingRegParams,
                        alpha: float) -> float:
    """Upper bound on the optimality gap of a feasible iterate (fairness > 1).

    Interprets the barrier weights at the current loads as Lagrange
    multipliers and evaluates the Lagrangian dual; weak duality makes the
    returned difference an upper bound on the true gap.
    """
    if alpha <= 1.0:
        raise InvalidAlpha("duality gap certificate requires alpha > 1")
    x_hat = np.asarray(x_hat, dtype=np.float64)
    kernel = GradientKernel(instance.matrix, alpha, params.beta, params.logC)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        u = kernel.allocation(x_hat)
        loads = kernel.loads_of(u)
        y = dual_vector(kernel, np.log(loads))
        dual = _dual_value(kernel, instance, alpha, y)
        primal = -float(np.add.reduce(x_hat)) / (1.0 - alpha)
    return primal - dual


def guarantee_target(alpha: float, epsilon: float, n: int, utility: float) -> tuple[float, str]:
    """Additive guarantee radius; the returned utility stands in for the
    unknown optimum and the form string says so."""
    if alpha == 1.0:
        return 3.0 * epsilon * n, "3*eps*n"
    if alpha < 1.0:
        return 3.0 * epsilon * (1.0 - alpha) * utility, "3*eps*(1-alpha)*utility"
    return 10.0 * epsilon * (alpha - 1.0) * abs(utility), "10*eps*(alpha-1)*|utility|"


class PackingRunRecorder:
    """Per-run bookkeeping shared by the monolithic and round engines:
    trace rows, the feasibility audit, gap certificates, the early-stop
    policy, and the post-burn-in slackness diagnostic (warn only)."""

    def __init__(self, kernel: GradientKernel, instance: PackingInstance,
                 params: PackingRegParams, config: SolverConfig,
                 check_feasibility: bool = True):
        self.kernel = kernel
        self.instance = instance
        self.params = params
        self.config = config
        self.alpha = config.alpha
        self.check_feasibility = check_feasibility
        self.burn_in = math.ceil(10.0 / params.beta)
        self.stop_scale = (
            10.0 * config.epsilon * (self.alpha - 1.0) if self.alpha > 1.0 else None
        )
        self._warned = False

    def record(self, x_hat: np.ndarray, u: np.ndarray, k: int, trace: TraceBuffer) -> TraceRow:
        kernel = self.kernel
        loads = kernel.loads_of(u)
        if self.check_feasibility:
            _require_feasible(loads, k)
        utility = f_alpha_value(u, self.alpha)
        f_r = kernel.f_r(x_hat, loads=loads)
        gap = None
        if self.alpha > 1.0:
            y = dual_vector(kernel, np.log(loads))
            try:
                dual = _dual_value(kernel, self.instance, self.alpha, y)
                gap = -float(np.add.reduce(x_hat)) / (1.0 - self.alpha) - dual
            except DualDomainError:
                gap = None
            if k > self.burn_in and not self._warned:
                lhs = float(np.add.reduce(y))
                rhs = (1.0 + self.config.epsilon) * float(y @ loads)
                if lhs > rhs * (1.0 + 1e-12):
                    warnings.warn(
                        f"dual mass {lhs:g} exceeds (1+eps) times its constraint "
                        f"coverage {rhs:g} at iteration {k} (past burn-in {self.burn_in})",
                        ComplementarySlacknessWarning,
                        stacklevel=3,
                    )
                    self._warned = True
        row = TraceRow(k=k, utility=utility, max_load=float(loads.max()), f_r=f_r, gap=gap)
        trace.append(row)
        return row

    def should_stop(self, row: TraceRow) -> bool:
        if self.stop_scale is None or not self.config.early_stop or row.gap is None:
            return False
        return row.gap <= self.stop_scale * abs(row.utility)


def plan_iterations(config: SolverConfig, params) -> tuple[int, int]:
    """Iteration budget (override-aware) and the trace stride for it."""
    planned = config.max_iters if config.max_iters is not None else params.K
    stride = config.trace_stride if config.trace_stride is not None else max(1, planned // 1000)
    return planned, stride


def finalize_packing(state: PackingState, instance: PackingInstance,
                     params: PackingRegParams, config: SolverConfig,
                     scaling: ScalingRecord, stopped_early: bool) -> PackingSolution:
    """Map the final iterate to original space and assemble the report."""
    alpha = config.alpha
    kernel = state.kernel
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        final_loads = kernel.loads_of(state.u)
        x = scaling.original_solution(state.u)
        utility = f_alpha_value(x, alpha)
        eps_f, form = guarantee_target(alpha, config.epsilon, instance.n, utility)
        dual = None
        gap = None
        if alpha > 1.0:
            dual = dual_vector(kernel, np.log(final_loads))
            try:
                gap = packing_duality_gap(instance, state.x_hat, params, alpha)
            except DualDomainError:
                gap = None
    return PackingSolution(
        x=x,
        utility=utility,
        eps_f=eps_f,
        eps_f_form=form,
        iterations_run=state.k,
        max_load=float(final_loads.max()),
        is_feasible=bool(final_loads.max() <= 1.0),
        dual_certificate=dual,
        gap_estimate=gap,
        trace=state.trace.rows(),
        params=params,
        stopped_early=stopped_early,
    )


def solve_packing(instance: PackingInstance, config: SolverConfig,
                  scaling: ScalingRecord | None = None,
                  check_feasibility: bool = True) -> PackingSolution:
    """Run the fixed iteration budget and map the final iterate back.

    The budget is the derived K unless ``config.max_iters`` overrides it.
    With ``config.early_stop`` (fairness > 1 only) the run stops at the
    first traced row whose duality-gap certificate is below
    ``10 eps (alpha-1) |utility|``.
    """
    alpha = config.alpha
    params = derive_packing_params(instance.m, instance.n, instance.rho, alpha, config.epsilon)
    if scaling is None:
        scaling = ScalingRecord(c=1.0, alpha_used=alpha)
    planned, stride = plan_iterations(config, params)

    state = init_packing(instance, config, params)
    recorder = PackingRunRecorder(state.kernel, instance, params, config, check_feasibility)
    stopped_early = False

    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        row = recorder.record(state.x_hat, state.u, 0, state.trace)
        stopped_early = recorder.should_stop(row)
        k = 0
        while k < planned and not stopped_early:
            k += 1
            step(state, instance, params, alpha, check_feasibility=check_feasibility)
            if k % stride == 0 or k == planned:
                row = recorder.record(state.x_hat, state.u, k, state.trace)
                stopped_early = recorder.should_stop(row)

    return finalize_packing(state, instance, params, config, scaling, stopped_early)
