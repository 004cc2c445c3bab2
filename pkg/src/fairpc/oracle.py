"""Independent reference optima for verification.

Closed-form KKT solutions for structured instances plus a damped-Newton
log-barrier solver for small dense ones. The Newton path deliberately
shares nothing with the main solvers: it works in the original allocation
space with a hard barrier, no change of variables, no regularization and
no gradient truncation, so agreement between the two is evidence rather
than tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonConvergence, UnsupportedStructure
from .problem import f_alpha_value, g_beta_value

NEWTON_MAX_STEPS = 2000


@dataclass(frozen=True, eq=False)
class OracleSolution:
    vector: np.ndarray
    objective: float
    method: str                     # "closed-form" | "newton"
    accuracy: float
    dual: np.ndarray | None = None  # covering oracles attach the packing-side optimum


def single_constraint_packing_optimum(a, alpha: float) -> OracleSolution:
    """KKT optimum of one packing constraint ``<a, x> <= 1``.

    For alpha = 0 the LP optimum concentrates on the smallest coefficient;
    ties break toward the lowest index.
    """
    a = np.asarray(a, dtype=np.float64)
    if (a <= 0.0).any():
        raise DomainError("constraint coefficients must be strictly positive")
    n = a.size
    if alpha == 0.0:
        j = int(np.argmin(a))
        x = np.zeros(n)
        x[j] = 1.0 / a[j]
        return OracleSolution(vector=x, objective=float(x[j]), method="closed-form", accuracy=0.0)
    # x_j = (lam * a_j)^(-1/alpha) with lam^(1/alpha) = sum_k a_k^((alpha-1)/alpha)
    scale = float(np.sum(a ** ((alpha - 1.0) / alpha)))
    x = a ** (-1.0 / alpha) / scale
    return OracleSolution(
        vector=x, objective=f_alpha_value(x, alpha), method="closed-form", accuracy=0.0
    )


def diagonal_packing_optimum(d, alpha: float) -> OracleSolution:
    """Decoupled constraints ``d_j x_j <= 1``: the optimum is x_j = 1/d_j."""
    d = np.asarray(d, dtype=np.float64)
    if (d <= 0.0).any():
        raise DomainError("diagonal must be strictly positive")
    x = 1.0 / d
    return OracleSolution(
        vector=x, objective=f_alpha_value(x, alpha), method="closed-form", accuracy=0.0
    )


def covering_closed_form_optimum(instance, beta: float) -> OracleSolution:
    """Covering optimum for diagonal or single-column instances.

    Attaches the packing-side dual optimum (the vector x with
    ``<1, x> = (1+beta) * cost``) for strong-duality checks.
    """
    mat = instance.matrix
    dense = mat.to_dense()
    m, n = dense.shape
    if m == n and mat.nnz == n and (np.diag(dense) > 0.0).all():
        diag = np.diag(dense)
        y = 1.0 / diag
        dual_x = diag ** (-(1.0 + beta))
        return OracleSolution(
            vector=y, objective=g_beta_value(y, beta), method="closed-form",
            accuracy=0.0, dual=dual_x,
        )
    if n == 1:
        a = dense[:, 0]
        if (a <= 0.0).any():
            raise UnsupportedStructure("single-column oracle needs a dense positive column")
        mu = 1.0 / float(np.sum(a ** ((1.0 + beta) / beta)))
        y = mu * a ** (1.0 / beta)
        dual_x = np.array([mu ** beta])
        return OracleSolution(
            vector=y, objective=g_beta_value(y, beta), method="closed-form",
            accuracy=0.0, dual=dual_x,
        )
    raise UnsupportedStructure("closed form available only for diagonal or single-column instances")


def _barrier_value(x, s, alpha, t):
    if alpha == 1.0:
        util = float(np.sum(np.log(x)))
    else:
        util = float(np.sum(x ** (1.0 - alpha))) / (1.0 - alpha)
    return -t * util - float(np.sum(np.log(s))) - float(np.sum(np.log(x)))


def small_dense_packing_optimum(instance, alpha: float, tol: float = 1e-9) -> OracleSolution:
    """Barrier-Newton optimum of a small packing instance.

    Path-following on ``-t f(x) - sum log(1 - (Ax)_i) - sum log x_j`` with
    damped Newton steps; the barrier parameter grows until the duality-gap
    certificate ``(m + n)/t`` is below ``tol``. Intended for m, n <= ~10.
    """
    if alpha < 0.0:
        raise DomainError(f"alpha must be >= 0, got {alpha}")
    if tol < 1e-12:
        raise DomainError("tol too small for double precision")
    A = instance.matrix.to_dense()
    m, n = A.shape

    # Ax <= 0.9 at the start, so the point is strictly interior
    x = np.full(n, 0.9 / float(np.max(A.sum(axis=1))))
    s = 1.0 - A @ x

    t = 1.0
    mu = 8.0
    total_steps = 0
    target_t = (m + n) / tol
    while True:
        # inner Newton loop for the current t
        for _ in range(200):
            total_steps += 1
            if total_steps > NEWTON_MAX_STEPS:
                raise NonConvergence(
                    f"Newton budget exhausted at t={t:g} (gap bound {(m + n) / t:g})"
                )
            s = 1.0 - A @ x
            inv_s = 1.0 / s
            if alpha == 1.0:
                grad_f = 1.0 / x
                hess_f_diag = 1.0 / x**2
            else:
                grad_f = x ** (-alpha)
                hess_f_diag = alpha * x ** (-alpha - 1.0)
            grad = -t * grad_f + A.T @ inv_s - 1.0 / x
            hess = (
                np.diag(t * hess_f_diag + 1.0 / x**2)
                + A.T @ np.diag(inv_s**2) @ A
            )
            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                hess = hess + 1e-12 * np.eye(n)
                step = np.linalg.solve(hess, -grad)
            decrement = float(-grad @ step)
            if decrement < 1e-18:
                break
            # keep strictly interior, then Armijo backtracking
            stepsize = 1.0
            Astep = A @ step
            pos = Astep > 0.0
            if pos.any():
                stepsize = min(stepsize, 0.99 * float(np.min(s[pos] / Astep[pos])))
            neg = step < 0.0
            if neg.any():
                stepsize = min(stepsize, 0.99 * float(np.min(-x[neg] / step[neg])))
            phi0 = _barrier_value(x, s, alpha, t)
            while stepsize > 1e-16:
                x_try = x + stepsize * step
                s_try = 1.0 - A @ x_try
                if (x_try > 0.0).all() and (s_try > 0.0).all():
                    if _barrier_value(x_try, s_try, alpha, t) <= phi0 - 0.25 * stepsize * decrement:
                        break
                stepsize *= 0.5
            x = x + stepsize * step
            if decrement < 1e-14:
                break
        if t >= target_t:
            break
        t = min(t * mu, target_t)

    gap_bound = (m + n) / t
    return OracleSolution(
        vector=x, objective=f_alpha_value(x, alpha), method="newton", accuracy=gap_bound
    )
