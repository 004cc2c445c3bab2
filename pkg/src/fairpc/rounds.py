"""Lockstep round-based execution with a locality audit.

One agent per coordinate holds only its own matrix column plus global
scalars. Every round the environment broadcasts the constraint loads; each
agent receives exactly the loads of its incident constraints and applies a
pure per-coordinate update. Rounds are deterministic lockstep, so the final
state is bit-identical to the monolithic solver (both engines share every
floating-point helper and the same summation primitives).

In audit mode every matrix read an agent performs is logged and checked,
per round, to stay inside the agent's own column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LocalityViolation, MissingLoad, TruncationDomainViolation
from .matrix import constraint_loads
from .problem import (
    COVER,
    PACK,
    CoveringInstance,
    PackingInstance,
    ScalingRecord,
    SolverConfig,
)
from .packing import (
    PackingRunRecorder,
    PackingState,
    TraceBuffer,
    additive_step_scale,
    additive_update,
    dual_vector,
    finalize_packing,
    init_packing,
    mirror_iterate,
    mirror_step_scale,
    mirror_update,
    multiplicative_step_scale,
    multiplicative_update,
    plan_iterations,
)
from .covering import (
    CoveringState,
    covering_trace_row,
    finalize_covering,
    init_covering,
    running_average,
)
from .regularization import (
    EXP_SAT,
    derive_covering_params,
    derive_packing_params,
    entry_exponents,
    log_allocation_term,
    transform_to_allocation,
)

_SEG_START = np.array([0], dtype=np.int64)


class AccessLog:
    """Collects and immediately verifies per-round matrix accesses."""

    def __init__(self, allowed_rows_by_agent: dict[int, frozenset[int]]):
        self.allowed = allowed_rows_by_agent
        self.touched: dict[int, set[tuple[int, int]]] = {j: set() for j in allowed_rows_by_agent}
        self.violations: list[tuple[int, int, int, int]] = []  # (round, agent, row, col)
        self.current_round = 0

    def note(self, agent_j: int, rows: np.ndarray, col: int) -> None:
        allowed = self.allowed[agent_j]
        for i in rows:
            i = int(i)
            self.touched[agent_j].add((i, col))
            if col != agent_j or i not in allowed:
                self.violations.append((self.current_round, agent_j, i, col))


@dataclass(eq=False)
class LocalView:
    """Everything coordinate ``j`` may read: its column and global scalars."""

    j: int
    col_rows: np.ndarray
    col_vals: np.ndarray
    lcv_logc: np.ndarray     # ln(A_ij) + logC, derived from the column only
    alpha: float
    inv_beta: float
    beta_prime: float | None
    step_scale: float
    epsilon: float
    m: int
    n: int
    rho: float
    access_log: AccessLog | None = None

    def incident(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The sanctioned matrix read; logged when auditing."""
        if self.access_log is not None:
            self.access_log.note(self.j, self.col_rows, self.j)
        return self.col_rows, self.col_vals, self.lcv_logc


@dataclass(frozen=True)
class RoundMessage:
    round_index: int
    loads: dict[int, float]


@dataclass(frozen=True)
class AgentState:
    x_hat: float
    z: float | None
    k: int


@dataclass(eq=False)
class LocalityAudit:
    performed: bool
    rounds: int = 0
    out_of_column: list = field(default_factory=list)
    message_key_mismatches: list = field(default_factory=list)
    touched_counts: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.out_of_column and not self.message_key_mismatches

    def require_clean(self) -> None:
        if not self.ok:
            raise LocalityViolation(
                f"locality audit failed: {len(self.out_of_column)} out-of-column accesses, "
                f"{len(self.message_key_mismatches)} malformed messages"
            )


def _uses_mirror(alpha: float) -> bool:
    return alpha < 1.0


def publish_allocation(view: LocalView, agent: AgentState) -> float:
    """The allocation value agent ``j`` exposes to its constraints this round."""
    if _uses_mirror(view.alpha):
        x_hat = mirror_iterate(np.float64(agent.z), view.beta_prime)
    else:
        x_hat = np.float64(agent.x_hat)
    return transform_to_allocation(x_hat, view.alpha)


def local_update(view: LocalView, msg: RoundMessage, agent: AgentState) -> AgentState:
    """Pure per-coordinate update from the local view and round message."""
    rows, _vals, lcv = view.incident()
    try:
        incident_loads = np.array([msg.loads[int(i)] for i in rows], dtype=np.float64)
    except KeyError as exc:
        raise MissingLoad(
            f"round {msg.round_index}: load for constraint {exc.args[0]} "
            f"missing from agent {view.j}'s message"
        ) from exc

    alpha = view.alpha
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        if _uses_mirror(alpha):
            x_hat = mirror_iterate(np.float64(agent.z), view.beta_prime)
        else:
            x_hat = np.float64(agent.x_hat)
        u = transform_to_allocation(x_hat, alpha)
        t = log_allocation_term(x_hat, u, alpha)
        q = view.inv_beta * np.log(incident_loads)
        e = entry_exponents(lcv, t, q)
        if float(np.max(e)) > EXP_SAT:
            truncated = 1.0
        else:
            positive_part = float(np.add.reduceat(np.exp(e), _SEG_START)[0])
            s = positive_part - 1.0
            if np.isnan(s) or s < -1.0:
                raise TruncationDomainViolation(
                    f"agent {view.j}: scaled gradient {s} below -1"
                )
            truncated = min(s, 1.0)

        if _uses_mirror(alpha):
            z_new = mirror_update(np.float64(agent.z), truncated, view.step_scale)
            return AgentState(x_hat=float(x_hat), z=float(z_new), k=agent.k + 1)
        if alpha == 1.0:
            x_new = additive_update(np.float64(agent.x_hat), truncated, view.step_scale)
        else:
            x_new = multiplicative_update(np.float64(agent.x_hat), truncated, view.step_scale)
        return AgentState(x_hat=float(x_new), z=None, k=agent.k + 1)


def _build_views(matrix, alpha, inv_beta, logc, beta_prime, step_scale, epsilon, rho,
                 log: AccessLog | None) -> list[LocalView]:
    views = []
    for j in range(matrix.n):
        rows, vals = matrix.column(j)
        views.append(
            LocalView(
                j=j,
                col_rows=rows,
                col_vals=vals,
                lcv_logc=np.log(vals) + logc,
                alpha=alpha,
                inv_beta=inv_beta,
                beta_prime=beta_prime,
                step_scale=step_scale,
                epsilon=epsilon,
                m=matrix.m,
                n=matrix.n,
                rho=rho,
                access_log=log,
            )
        )
    return views


def _messages_for(views, loads, k, log: AccessLog | None, audit_obj: LocalityAudit):
    msgs = []
    for view in views:
        keys = [int(i) for i in view.col_rows]
        msgs.append(RoundMessage(round_index=k, loads={i: float(loads[i]) for i in keys}))
        if log is not None and set(keys) != log.allowed[view.j]:
            audit_obj.message_key_mismatches.append((k, view.j))
    return msgs


def run_distributed(instance, config: SolverConfig, mode: str | None = None,
                    scaling: ScalingRecord | None = None, audit: bool = True):
    """Execute the solve as lockstep rounds; returns (solution, audit).

    The solution is bit-identical to the corresponding monolithic solver's
    output. The audit reports, per round, every matrix entry each agent
    read and fails if any read leaves the agent's own column.
    """
    if mode is None:
        mode = config.mode
    if mode == PACK:
        if not isinstance(instance, PackingInstance):
            raise TypeError("pack mode needs a PackingInstance")
        return _run_packing(instance, config, scaling, audit)
    if mode == COVER:
        if not isinstance(instance, CoveringInstance):
            raise TypeError("cover mode needs a CoveringInstance")
        return _run_covering(instance, config, scaling, audit)
    raise ValueError(f"unknown mode {mode!r}")


def _allowed_rows(matrix) -> dict[int, frozenset[int]]:
    return {
        j: frozenset(int(i) for i in matrix.column(j)[0]) for j in range(matrix.n)
    }


def _run_packing(instance: PackingInstance, config: SolverConfig,
                 scaling: ScalingRecord | None, audit: bool):
    alpha = config.alpha
    params = derive_packing_params(instance.m, instance.n, instance.rho, alpha, config.epsilon)
    if scaling is None:
        scaling = ScalingRecord(c=1.0, alpha_used=alpha)
    matrix = instance.matrix
    planned, stride = plan_iterations(config, params)

    log = AccessLog(_allowed_rows(matrix)) if audit else None
    audit_obj = LocalityAudit(performed=audit)

    if alpha < 1.0:
        step_scale = mirror_step_scale(params)
    elif alpha == 1.0:
        step_scale = additive_step_scale(params)
    else:
        step_scale = multiplicative_step_scale(params, alpha)
    views = _build_views(
        matrix, alpha, 1.0 / params.beta, params.logC, params.beta_prime,
        step_scale, config.epsilon, instance.rho, log,
    )

    seed = init_packing(instance, config, params)
    agents = [
        AgentState(
            x_hat=float(seed.x_hat[j]),
            z=float(seed.z[j]) if seed.z is not None else None,
            k=0,
        )
        for j in range(matrix.n)
    ]
    kernel = seed.kernel  # environment-side observer for traces and finalization
    recorder = PackingRunRecorder(kernel, instance, params, config)
    trace = TraceBuffer()

    def assemble() -> PackingState:
        x_hat = np.array([a.x_hat for a in agents])
        z = np.array([a.z for a in agents]) if alpha < 1.0 else None
        u = kernel.allocation(x_hat)
        return PackingState(x_hat=x_hat, z=z, u=u, k=k, trace=trace, kernel=kernel)

    k = 0
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        snap = assemble()
        row = recorder.record(snap.x_hat, snap.u, 0, trace)
        stopped_early = recorder.should_stop(row)
        while k < planned and not stopped_early:
            k += 1
            if log is not None:
                log.current_round = k
            published = np.array([publish_allocation(v, a) for v, a in zip(views, agents)])
            loads = constraint_loads(matrix, published)
            msgs = _messages_for(views, loads, k, log, audit_obj)
            agents = [local_update(v, m, a) for v, m, a in zip(views, msgs, agents)]
            if k % stride == 0 or k == planned:
                snap = assemble()
                row = recorder.record(snap.x_hat, snap.u, k, trace)
                stopped_early = recorder.should_stop(row)

    audit_obj.rounds = k
    if log is not None:
        audit_obj.out_of_column = log.violations
        audit_obj.touched_counts = {j: len(s) for j, s in log.touched.items()}
        audit_obj.require_clean()

    final = assemble()
    solution = finalize_packing(final, instance, params, config, scaling, stopped_early)
    return solution, audit_obj


def _run_covering(instance: CoveringInstance, config: SolverConfig,
                  scaling: ScalingRecord | None, audit: bool):
    params = derive_covering_params(
        instance.m, instance.n, instance.rho, config.beta, config.epsilon
    )
    if scaling is None:
        scaling = ScalingRecord(c=1.0, alpha_used=-params.beta)
    matrix = instance.matrix
    planned, stride = plan_iterations(config, params)

    log = AccessLog(_allowed_rows(matrix)) if audit else None
    audit_obj = LocalityAudit(performed=audit)
    views = _build_views(
        matrix, 0.0, 1.0 / params.beta, 0.0, params.beta_prime,
        mirror_step_scale(params), config.epsilon, instance.rho, log,
    )

    seed = init_covering(instance, config, params)
    agents = [
        AgentState(x_hat=float(seed.x[j]), z=float(seed.z[j]), k=0)
        for j in range(matrix.n)
    ]
    kernel = seed.kernel
    trace = TraceBuffer()
    y_avg = seed.y_avg

    def assemble() -> CoveringState:
        x = np.array([a.x_hat for a in agents])
        z = np.array([a.z for a in agents])
        return CoveringState(x=x, z=z, y_avg=y_avg, k=k, trace=trace, kernel=kernel)

    k = 0
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        trace.append(covering_trace_row(kernel, assemble().x, 0))
        for k in range(1, planned + 1):
            if log is not None:
                log.current_round = k
            published = np.array([publish_allocation(v, a) for v, a in zip(views, agents)])
            loads = constraint_loads(matrix, published)
            msgs = _messages_for(views, loads, k, log, audit_obj)
            agents = [local_update(v, m, a) for v, m, a in zip(views, msgs, agents)]
            y_avg = running_average(y_avg, dual_vector(kernel, np.log(loads)), k)
            if k % stride == 0 or k == planned:
                trace.append(covering_trace_row(kernel, assemble().x, k))

    audit_obj.rounds = k
    if log is not None:
        audit_obj.out_of_column = log.violations
        audit_obj.touched_counts = {j: len(s) for j, s in log.touched.items()}
        audit_obj.require_clean()

    solution = finalize_covering(assemble(), instance, params, config, scaling)
    return solution, audit_obj
