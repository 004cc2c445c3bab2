"""Regularized objective, derived constants, and log-domain gradients.

The constrained problem is replaced by minimizing

    f_r(x) = -(linear utility) + (beta/(1+beta)) * sum_i C * load_i**((1+beta)/beta)

over the transformed iterate, where ``load_i`` is the i-th constraint load.
With realistic parameters ``1/beta`` is in the hundreds, so any quantity of
the form ``C * load**(1/beta)`` is carried as a natural-log exponent and only
exponentiated after all logs are combined. Exponents above ``EXP_SAT`` are
never materialized: the scaled gradient is then certainly above +1 and is
truncated analytically, and f_r reports a positive-overflow marker instead
of a finite lie.

Every floating-point step here is shared verbatim between the monolithic
solver and the per-coordinate distributed update (see ``rounds``), which is
what makes the two engines bit-identical.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EpsilonOutOfRange, InvalidAlpha, TruncationDomainViolation
from .matrix import SparseNonnegMatrix
from .problem import epsilon_upper_bound

# saturation threshold for combined log exponents, near the float64 overflow bound
EXP_SAT = 700.0

# marker returned by f_r_value when the barrier exponent exceeds EXP_SAT
POSITIVE_OVERFLOW = math.inf


def is_positive_overflow(value: float) -> bool:
    return math.isinf(value) and value > 0


class SubThresholdBetaWarning(UserWarning):
    """Fairness beta below the floor assumed by the covering guarantee."""


@dataclass(frozen=True)
class PackingRegParams:
    """Derived constants for one packing run.

    Constructing directly (rather than through ``derive_packing_params``)
    is supported for tests that need moderate injected values; the solver
    path always derives.
    """

    alpha: float
    epsilon: float
    beta: float
    logC: float
    K: int
    beta_prime: float | None = None  # alpha < 1 only
    h: float | None = None           # alpha < 1 only


@dataclass(frozen=True)
class CoveringRegParams:
    """Derived constants for one covering run; the barrier uses C = 1."""

    epsilon: float
    beta: float            # fairness exponent, reset if the input was <= 0
    beta_prime: float
    h: float
    K: int
    was_reset: bool = False
    below_guarantee_floor: bool = False
    logC: float = 0.0


def derive_packing_params(m: int, n: int, rho: float, alpha: float, epsilon: float) -> PackingRegParams:
    """Evaluate the packing run constants for the given standardized shape."""
    if alpha < 0.0:
        raise InvalidAlpha(f"alpha must be >= 0, got {alpha}")
    hi = epsilon_upper_bound(alpha)
    if not (0.0 < epsilon <= hi):
        raise EpsilonOutOfRange(
            f"epsilon must lie in (0, {hi:g}] (= min(1/2, 1/(10|alpha-1|)) "
            f"for alpha={alpha:g}), got {epsilon}"
        )
    if m < 1 or n < 1 or rho < 1.0:
        raise ValueError("need m, n >= 1 and rho >= 1")

    beta = (epsilon / 4.0) / ((1.0 + alpha) * math.log(4.0 * m * n * rho / epsilon))
    logC = math.log(1.0 + epsilon / 2.0) / beta
    if alpha < 1.0:
        beta_prime = (1.0 - alpha) * (epsilon / 4.0) / math.log(n * rho / (1.0 - epsilon))
        h = (1.0 - alpha) * beta * beta_prime / (16.0 * epsilon * (1.0 + alpha * beta))
        K = math.ceil(2.0 / ((1.0 - alpha) * h * epsilon))
    elif alpha == 1.0:
        beta_prime = None
        h = None
        K = math.ceil(10.0 * math.log(8.0 * rho * m * n / epsilon) ** 2 / (epsilon * beta))
    else:
        beta_prime = None
        h = None
        gap = min(alpha - 1.0, 1.0)
        K = math.ceil(
            800.0 * (1.0 + alpha) ** 2 * math.log(n * rho / (epsilon * gap)) / (beta * gap)
        )
    return PackingRegParams(
        alpha=alpha, epsilon=epsilon, beta=beta, logC=logC,
        beta_prime=beta_prime, h=h, K=int(K),
    )


def derive_covering_params(m: int, n: int, rho: float, beta: float, epsilon: float) -> CoveringRegParams:
    """Evaluate the covering run constants, resetting beta <= 0 to the floor."""
    if not (0.0 < epsilon <= 0.5):
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 0.5] for covering, got {epsilon}")
    if m < 1 or n < 1 or rho < 1.0:
        raise ValueError("need m, n >= 1 and rho >= 1")

    floor = (epsilon / 4.0) / math.log(m * n * rho / epsilon)
    was_reset = beta <= 0.0
    if was_reset:
        beta = floor
    below = (not was_reset) and beta < floor
    if below:
        warnings.warn(
            f"fairness beta={beta:g} is below the guarantee floor {floor:g}; "
            "the cost bound is not guaranteed in this regime",
            SubThresholdBetaWarning,
            stacklevel=2,
        )
    beta_prime = (epsilon / 4.0) / ((1.0 + beta) * math.log(m * n * rho / epsilon))
    h = beta * beta_prime / (16.0 * epsilon)
    K = 1 + math.ceil(2.0 / (h * epsilon))
    return CoveringRegParams(
        epsilon=epsilon, beta=beta, beta_prime=beta_prime, h=h, K=int(K),
        was_reset=was_reset, below_guarantee_floor=below,
    )


@dataclass(frozen=True, eq=False)
class GradientPair:
    """Gradient data at one iterate.

    ``truncated`` is the scaled-and-clipped gradient, every entry in
    [-1, 1]. Saturated coordinates (combined exponent above EXP_SAT) carry
    a signed-infinity sentinel in ``grad`` and exactly 1.0 in ``truncated``;
    no arithmetic is ever performed on the sentinel.
    """

    grad: np.ndarray
    truncated: np.ndarray
    loads: np.ndarray
    log_loads: np.ndarray

    @property
    def max_load(self) -> float:
        return float(self.loads.max())


def entry_exponents(lcv_logc, t, q):
    """Combined per-entry log exponent; grouping is part of the contract.

    Both engines must evaluate ``(lcv_logc + t) + q`` with this exact
    association so their floating-point results agree bitwise.
    """
    return (lcv_logc + t) + q


def transform_to_allocation(x_hat, alpha: float):
    """F(x_hat): the allocation-space image of a transformed iterate.

    alpha = 0 is the identity and returns the input unchanged so that both
    execution engines see literally the same values.
    """
    if alpha == 0.0:
        return x_hat
    if alpha == 1.0:
        return np.exp(x_hat)
    return np.power(x_hat, 1.0 / (1.0 - alpha))


def log_allocation_term(x_hat, u, alpha: float):
    """The per-coordinate log factor multiplying the barrier sum.

    alpha = 0 contributes nothing; alpha = 1 uses the iterate itself (it is
    already the log of the allocation, exactly); otherwise alpha * ln(u).
    """
    if alpha == 0.0:
        return 0.0
    if alpha == 1.0:
        return x_hat
    return alpha * np.log(u)


class GradientKernel:
    """Precomputed arrays for repeated gradient evaluation on one instance.

    One kernel serves one (matrix, alpha, beta, logC) combination; solvers
    build it once and call :meth:`evaluate` every iteration.
    """

    def __init__(self, matrix: SparseNonnegMatrix, alpha: float, beta: float, logC: float):
        self.matrix = matrix
        self.alpha = alpha
        self.beta = beta
        self.logC = logC
        self.inv_beta = 1.0 / beta
        self.barrier_ratio = (1.0 + beta) / beta
        self.lcv_logc = np.log(matrix.col_val) + logC
        self._col_starts = matrix.col_ptr[:-1]
        self._row_starts = matrix.row_ptr[:-1]

    def allocation(self, x_hat: np.ndarray) -> np.ndarray:
        return transform_to_allocation(x_hat, self.alpha)

    def loads_of(self, u: np.ndarray) -> np.ndarray:
        terms = self.matrix.row_val * u[self.matrix.row_col]
        return np.add.reduceat(terms, self._row_starts)

    def evaluate(self, x_hat: np.ndarray, u: np.ndarray | None = None,
                 loads: np.ndarray | None = None) -> GradientPair:
        """Scaled, truncated, and raw gradient at ``x_hat``."""
        mat = self.matrix
        alpha = self.alpha
        if u is None:
            u = self.allocation(x_hat)
        if loads is None:
            loads = self.loads_of(u)
        log_loads = np.log(loads)
        q = self.inv_beta * log_loads

        t = log_allocation_term(x_hat, u, alpha)
        t_entry = t if np.isscalar(t) else np.take(t, mat.col_colidx)
        e = entry_exponents(self.lcv_logc, t_entry, np.take(q, mat.col_row))

        emax = float(e.max())
        saturated_cols = None
        if emax > EXP_SAT:
            col_max = np.maximum.reduceat(e, self._col_starts)
            saturated_cols = col_max > EXP_SAT
            e = np.where(e > EXP_SAT, -np.inf, e)
        positive_part = np.add.reduceat(np.exp(e), self._col_starts)
        s = positive_part - 1.0

        smin = s.min()
        if np.isnan(smin) or smin < -1.0:
            raise TruncationDomainViolation(
                f"scaled gradient fell below -1 (min {smin}); solver state is corrupted"
            )
        truncated = np.minimum(s, 1.0)
        if alpha == 1.0:
            grad = s.copy()
            sentinel = np.inf
        else:
            grad = s / (1.0 - alpha)
            sentinel = np.inf if alpha < 1.0 else -np.inf
        if saturated_cols is not None and saturated_cols.any():
            truncated[saturated_cols] = 1.0
            grad[saturated_cols] = sentinel
        return GradientPair(grad=grad, truncated=truncated, loads=loads, log_loads=log_loads)

    def f_r(self, x_hat: np.ndarray, loads: np.ndarray | None = None) -> float:
        """Regularized objective value; may return POSITIVE_OVERFLOW."""
        if loads is None:
            loads = self.loads_of(self.allocation(x_hat))
        lin = float(np.add.reduce(np.asarray(x_hat, dtype=np.float64)))
        if self.alpha == 1.0:
            lin = -lin
        else:
            lin = -lin / (1.0 - self.alpha)
        be = self.logC + self.barrier_ratio * np.log(loads)
        if float(be.max()) > EXP_SAT:
            return POSITIVE_OVERFLOW
        barrier = (self.beta / (1.0 + self.beta)) * float(np.add.reduce(np.exp(be)))
        return lin + barrier


def _check_domain(x_hat, alpha: float) -> np.ndarray:
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if alpha != 1.0 and (x_hat <= 0.0).any():
        raise DomainError(f"iterate must be strictly positive for alpha={alpha}")
    if np.isnan(x_hat).any():
        raise DomainError("iterate contains NaN")
    return x_hat


def f_r_value(instance, params, x_hat, alpha: float) -> float:
    """Regularized objective at ``x_hat`` (transformed space).

    Zero loads contribute exactly zero to the barrier. When any barrier
    exponent exceeds EXP_SAT the returned value is POSITIVE_OVERFLOW
    (+inf), a tagged marker rather than a finite lie.
    """
    x_hat = _check_domain(x_hat, alpha)
    kernel = GradientKernel(instance.matrix, alpha, params.beta, params.logC)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        return kernel.f_r(x_hat)


def grad_f_r(instance, params, x_hat, alpha: float) -> GradientPair:
    """Gradient of f_r with its truncated companion, in log-domain."""
    x_hat = _check_domain(x_hat, alpha)
    kernel = GradientKernel(instance.matrix, alpha, params.beta, params.logC)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        return kernel.evaluate(x_hat)


def truncate(grad_j: float, alpha: float) -> float:
    """Scale one gradient entry and clip it to [-1, 1] from above.

    Values whose scaled form falls below -1 cannot occur for the functions
    this solver minimizes; seeing one means the state is corrupted.
    """
    s = grad_j if alpha == 1.0 else (1.0 - alpha) * grad_j
    if s > 1.0:
        return 1.0
    if s < -1.0 or math.isnan(s):
        raise TruncationDomainViolation(f"scaled gradient {s} below -1")
    return float(s)
