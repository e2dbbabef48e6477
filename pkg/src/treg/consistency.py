"""Proximal data-consistency solvers.

For linear operators the minimizer of lam*||x - anchor||^2 + ||y - Ax||^2
solves the SPD normal equations (lam*I + A^T A) x = lam*anchor + A^T y,
handled by a fixed small number of conjugate-gradient steps warm-started at
the anchor. For the nonlinear phase-retrieval objective the same proximal
form is minimized with Adam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnsupportedOperatorError
from .operators import ForwardOperator

ADAM_EPS = 1e-8


@dataclass(frozen=True)
class CGParams:
    lam: float = 1e-4
    iters: int = 5
    tol: float = 0.0  # early exit on system residual norm; 0 disables

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigError(f"cg.lam must be positive, got {self.lam}")
        if self.iters < 1:
            raise ConfigError(f"cg.iters must be >= 1, got {self.iters}")
        if self.tol < 0:
            raise ConfigError(f"cg.tol must be >= 0, got {self.tol}")


@dataclass(frozen=True)
class AdamParams:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    iters: int = 100
    lam: float = 0.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"adam.lr must be positive, got {self.lr}")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ConfigError(f"adam betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.iters < 1:
            raise ConfigError(f"adam.iters must be >= 1, got {self.iters}")
        if self.lam < 0:
            raise ConfigError(f"adam.lam must be >= 0, got {self.lam}")


def proximal_objective(
    op: ForwardOperator, y: np.ndarray, anchor: np.ndarray, lam: float, x: np.ndarray
) -> float:
    r = y - op.apply(x)
    dx = x - anchor
    return float(lam * dx @ dx + r @ r)


def cg_solve(
    op: ForwardOperator,
    y: np.ndarray,
    anchor: np.ndarray,
    params: CGParams,
    warm_start: np.ndarray | None = None,
    residual_log: list | None = None,
) -> np.ndarray:
    if not op.linear:
        raise UnsupportedOperatorError(f"cg_solve requires a linear operator, got {op.kind}")
    anchor = np.asarray(anchor, dtype=float)
    lam = params.lam

    def matvec(v):
        return lam * v + op.adjoint(op.apply(v))

    b = lam * anchor + op.adjoint(np.asarray(y, dtype=float))
    x = anchor.copy() if warm_start is None else np.asarray(warm_start, dtype=float).copy()
    r = b - matvec(x)
    p = r.copy()
    rr = float(r @ r)
    if residual_log is not None:
        residual_log.append(np.sqrt(rr))
    for _ in range(params.iters):
        if params.tol > 0.0 and np.sqrt(rr) <= params.tol:
            break
        if rr == 0.0:
            break
        ap = matvec(p)
        pap = float(p @ ap)
        if pap <= 0.0:  # exact convergence up to rounding
            break
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        if residual_log is not None:
            residual_log.append(np.sqrt(rr_new))
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def adam_solve(
    op: ForwardOperator,
    y: np.ndarray,
    anchor: np.ndarray,
    params: AdamParams,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Adam on lam*||x - anchor||^2 + ||y - A(x)||^2, fixed iteration count."""
    anchor = np.asarray(anchor, dtype=float)
    y = np.asarray(y, dtype=float)
    x = anchor.copy() if init is None else np.asarray(init, dtype=float).copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2 = params.beta1, params.beta2
    for k in range(1, params.iters + 1):
        g = op.residual_gradient(x, y)
        if params.lam > 0.0:
            g = g + 2.0 * params.lam * (x - anchor)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**k)
        v_hat = v / (1.0 - b2**k)
        x -= params.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return x
