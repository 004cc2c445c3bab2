"""Problem representation: standard scaled form, objectives, transforms.

Packing instances maximize the fairness utility subject to ``Ax <= 1``,
``x >= 0``; covering instances minimize a power cost subject to
``A^T y >= 1``, ``y >= 0``. Both are kept in standard scaled form: the
matrix is divided by its minimum nonzero entry, so the minimum entry is
exactly 1 and the maximum entry equals the width ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllZero,
    DomainError,
    EpsilonOutOfRange,
    InvalidAlpha,
    NegativeCoordinate,
    NegativeEntry,
    NonPositiveCoordinate,
)
from .matrix import SparseNonnegMatrix, build_matrix

PACK = "pack"
COVER = "cover"


@dataclass(frozen=True)
class ScalingRecord:
    """Maps solutions of the standardized instance back to the original one.

    ``c`` is the original minimum nonzero entry. Dividing a standardized
    solution by ``c`` recovers an original-space solution with identical
    constraint loads. ``alpha_used`` records the fairness parameter so
    objective values can be rescaled: for alpha != 1 the utility picks up a
    factor ``c**(alpha-1)``, for alpha = 1 an additive shift ``n*ln(1/c)``.
    """

    c: float
    alpha_used: float

    def original_solution(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=np.float64) / self.c

    def original_utility(self, standardized_value: float, size: int) -> float:
        if self.alpha_used == 1.0:
            return standardized_value + size * math.log(1.0 / self.c)
        return self.c ** (self.alpha_used - 1.0) * standardized_value


def _check_standardized(matrix: SparseNonnegMatrix, rho: float) -> None:
    if matrix.min_entry != 1.0:
        raise ValueError(
            f"instance is not in standard form: minimum entry {matrix.min_entry} != 1"
        )
    if rho != matrix.max_entry or rho < 1.0:
        raise ValueError(f"width {rho} does not equal the maximum entry {matrix.max_entry}")


@dataclass(frozen=True)
class PackingInstance:
    matrix: SparseNonnegMatrix
    rho: float

    def __post_init__(self):
        _check_standardized(self.matrix, self.rho)

    @property
    def m(self) -> int:
        return self.matrix.m

    @property
    def n(self) -> int:
        return self.matrix.n


@dataclass(frozen=True)
class CoveringInstance:
    """Standardized covering data; the constraints are the columns of A."""

    matrix: SparseNonnegMatrix
    rho: float

    def __post_init__(self):
        _check_standardized(self.matrix, self.rho)

    @property
    def m(self) -> int:
        return self.matrix.m

    @property
    def n(self) -> int:
        return self.matrix.n


def standardize(entries, m: int, n: int, mode: str = PACK, fairness: float = 0.0):
    """Scale a raw nonnegative entry list into standard form.

    Zero entries are dropped; afterwards every row and column must still be
    nonempty. Returns the instance (packing or covering, per ``mode``) and
    the ScalingRecord carrying the scale factor.
    """
    if mode not in (PACK, COVER):
        raise ValueError(f"mode must be {PACK!r} or {COVER!r}, got {mode!r}")
    kept = []
    saw_any = False
    for i, j, v in entries:
        saw_any = True
        if v < 0.0:
            raise NegativeEntry(f"entry ({i}, {j}) is negative: {v}")
        if v > 0.0:
            kept.append((i, j, float(v)))
    if not kept:
        if saw_any:
            raise AllZero("all entries are zero")
        raise AllZero("no entries given")
    c = min(v for _, _, v in kept)
    scaled = [(i, j, v / c) for i, j, v in kept]
    matrix = build_matrix(scaled, m, n)
    rho = matrix.max_entry
    record = ScalingRecord(c=c, alpha_used=float(fairness))
    if mode == PACK:
        return PackingInstance(matrix=matrix, rho=rho), record
    return CoveringInstance(matrix=matrix, rho=rho), record


def instance_from_dense(dense, mode: str = PACK, fairness: float = 0.0):
    dense = np.asarray(dense, dtype=np.float64)
    m, n = dense.shape
    ij = np.argwhere(dense != 0.0)
    entries = [(int(i), int(j), float(dense[i, j])) for i, j in ij]
    return standardize(entries, m, n, mode=mode, fairness=fairness)


def epsilon_upper_bound(alpha: float) -> float:
    """Admissible epsilon ceiling for packing: min(1/2, 1/(10|alpha-1|))."""
    if alpha == 1.0:
        return 0.5
    return min(0.5, 1.0 / (10.0 * abs(alpha - 1.0)))


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters: fairness (alpha or beta), epsilon, and overrides."""

    fairness: float
    epsilon: float
    mode: str = PACK
    max_iters: int | None = None
    early_stop: bool = False
    trace_stride: int | None = None

    def __post_init__(self):
        if self.mode not in (PACK, COVER):
            raise ValueError(f"mode must be {PACK!r} or {COVER!r}, got {self.mode!r}")
        if self.mode == PACK:
            if self.fairness < 0.0:
                raise InvalidAlpha(f"alpha must be >= 0, got {self.fairness}")
            hi = epsilon_upper_bound(self.fairness)
            if not (0.0 < self.epsilon <= hi):
                raise EpsilonOutOfRange(
                    f"epsilon must lie in (0, {hi:g}] "
                    f"(= min(1/2, 1/(10|alpha-1|)) for alpha={self.fairness:g}), "
                    f"got {self.epsilon}"
                )
        else:
            if not (0.0 < self.epsilon <= 0.5):
                raise EpsilonOutOfRange(
                    f"epsilon must lie in (0, 0.5] for covering, got {self.epsilon}"
                )
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters override must be >= 1")
        if self.trace_stride is not None and self.trace_stride < 1:
            raise ValueError("trace_stride must be >= 1")

    @property
    def alpha(self) -> float:
        return self.fairness

    @property
    def beta(self) -> float:
        return self.fairness


def f_alpha_value(x, alpha: float) -> float:
    """Fairness utility: sum of x**(1-alpha)/(1-alpha), or sum of ln(x)."""
    if alpha < 0.0:
        raise InvalidAlpha(f"alpha must be >= 0, got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    if (x < 0.0).any():
        raise NegativeCoordinate("utility undefined for negative coordinates")
    if alpha >= 1.0 and (x == 0.0).any():
        raise NonPositiveCoordinate(
            f"utility is -inf at zero coordinates for alpha={alpha}"
        )
    if alpha == 1.0:
        return float(np.add.reduce(np.log(x)))
    return float(np.add.reduce(np.power(x, 1.0 - alpha))) / (1.0 - alpha)


def g_beta_value(y, beta: float) -> float:
    """Covering cost: sum of y**(1+beta)/(1+beta) over y >= 0."""
    y = np.asarray(y, dtype=np.float64)
    if (y < 0.0).any():
        raise NegativeCoordinate("cost undefined for negative coordinates")
    return float(np.add.reduce(np.power(y, 1.0 + beta))) / (1.0 + beta)


def transform(x_hat, alpha: float):
    """Map the linearized iterate back to allocation space.

    x = x_hat**(1/(1-alpha)) for alpha != 1, exp(x_hat) for alpha = 1.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if alpha == 1.0:
        return np.exp(x_hat)
    if (x_hat <= 0.0).any():
        raise DomainError("transform requires positive input for alpha != 1")
    return np.power(x_hat, 1.0 / (1.0 - alpha))


def transform_inverse(x, alpha: float):
    """Inverse map: x**(1-alpha) for alpha != 1, ln(x) for alpha = 1."""
    x = np.asarray(x, dtype=np.float64)
    if (x <= 0.0).any():
        raise DomainError("transform_inverse requires strictly positive input")
    if alpha == 1.0:
        return np.log(x)
    return np.power(x, 1.0 - alpha)


def optimum_bounds(instance, alpha: float) -> tuple[float, float]:
    """Bracket the optimal utility of a standardized packing instance.

    The infinity norm of a standardized matrix is its width rho.
    """
    n = instance.n
    rho = instance.rho
    if alpha == 1.0:
        return -n * math.log(n * rho), 0.0
    lower = (n / (1.0 - alpha)) * (n * rho) ** (alpha - 1.0)
    upper = n / (1.0 - alpha)
    return lower, upper


def covering_optimum_bounds(instance, beta: float) -> tuple[float, float]:
    """Bracket the optimal covering cost (width-based sandwich)."""
    mm = instance.m
    rho = instance.rho
    lower = (1.0 / (mm * rho)) ** (1.0 + beta) * mm / (1.0 + beta)
    upper = mm / (1.0 + beta)
    return lower, upper
