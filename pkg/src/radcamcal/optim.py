"""Damped least-squares minimization and small statistics helpers.

The solver minimizes 0.5-free sum-of-squares cost |r(x)|^2 by the classic
Levenberg-Marquardt scheme: solve (J^T J + lambda I) step = -J^T r, accept a
step only if the cost does not increase, shrink lambda after an accepted
step, and grow it while a step is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EmptyInputError, InvalidStartError, NumericalFailureError

LAMBDA_MAX = 1e15


@dataclass
class LmOptions:
    """Solver knobs; defaults suit pixel-scale reprojection problems."""

    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    max_iters: int = 100
    cost_tol: float = 1e-10
    step_tol: float = 1e-12
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.lambda_init <= 0 or self.lambda_up <= 1 or self.lambda_down <= 1:
            raise ValueError("damping parameters must satisfy init > 0, up > 1, down > 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.cost_tol <= 0 or self.step_tol <= 0 or self.fd_step <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class LmResult:
    x: np.ndarray
    cost: float
    iterations: int
    converged: bool
    reason: str


def numeric_jacobian(residual_fn: Callable, x, fd_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of residual_fn at x, shape (m, n)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = fd_step
        hi = np.asarray(residual_fn(x + e), dtype=float)
        lo = np.asarray(residual_fn(x - e), dtype=float)
        cols.append((hi - lo) / (2.0 * fd_step))
    J = np.column_stack(cols)
    if not np.all(np.isfinite(J)):
        raise NumericalFailureError("non-finite entries in numeric Jacobian")
    return J


def levenberg_marquardt(
    residual_fn: Callable,
    x0,
    opts: Optional[LmOptions] = None,
    jacobian: Optional[Callable] = None,
) -> LmResult:
    """Minimize |residual_fn(x)|^2 starting from x0.

    Args:
        residual_fn: maps an (n,) parameter vector to an (m,) residual, m >= n.
        x0: start point.
        opts: LmOptions; defaults used when omitted.
        jacobian: optional analytic Jacobian callable with the same signature
            as residual_fn returning (m, n); central differences otherwise.

    Returns:
        LmResult with the best parameters found.  The final cost never
        exceeds the cost at x0.

    Raises:
        InvalidStartError: residual at x0 is non-finite.
        NumericalFailureError: the damped normal equations stayed unsolvable
            or every step was rejected up to the damping cap.
    """
    opts = opts or LmOptions()
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1:
        raise ValueError("x0 must be a flat parameter vector")
    r = np.asarray(residual_fn(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise InvalidStartError("residual at the start point is not finite")
    cost = float(r @ r)
    lam = opts.lambda_init
    converged = False
    reason = "max-iterations"
    iterations = 0
    eye = np.eye(x.size)
    for iterations in range(1, opts.max_iters + 1):
        if jacobian is not None:
            J = np.asarray(jacobian(x), dtype=float)
        else:
            J = numeric_jacobian(residual_fn, x, opts.fd_step)
        g = J.T @ r
        JtJ = J.T @ J
        step = None
        x_new = r_new = None
        cost_new = None
        while True:
            try:
                cand = np.linalg.solve(JtJ + lam * eye, -g)
            except np.linalg.LinAlgError:
                cand = None
            if cand is not None and np.all(np.isfinite(cand)):
                x_try = x + cand
                r_try = np.asarray(residual_fn(x_try), dtype=float)
                if np.all(np.isfinite(r_try)):
                    c_try = float(r_try @ r_try)
                    if c_try <= cost:
                        step, x_new, r_new, cost_new = cand, x_try, r_try, c_try
                        break
            lam *= opts.lambda_up
            if lam > LAMBDA_MAX:
                raise NumericalFailureError(
                    "damped normal equations unsolvable up to the damping cap"
                )
        prev_cost = cost
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam / opts.lambda_down, 1e-15)
        rel_drop = (prev_cost - cost) / max(prev_cost, 1e-300)
        if rel_drop < opts.cost_tol:
            converged = True
            reason = "cost-tolerance"
            break
        if float(np.linalg.norm(step)) < opts.step_tol:
            converged = True
            reason = "step-tolerance"
            break
    return LmResult(x=x, cost=cost, iterations=iterations, converged=converged, reason=reason)


def zscore(values) -> np.ndarray:
    """Z-scores with the sample (N-1) standard deviation.

    Inputs shorter than two elements or with std below 1e-12 give all zeros;
    an empty input raises EmptyInputError.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptyInputError("zscore of an empty sequence")
    if v.size < 2:
        return np.zeros_like(v)
    std = float(v.std(ddof=1))
    if std < 1e-12:
        return np.zeros_like(v)
    return (v - v.mean()) / std
