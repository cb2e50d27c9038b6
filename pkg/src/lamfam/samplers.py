"""Metropolis-adjusted Langevin sampling of escort distributions.

The target is ``pi^(alpha) ~ pi~^alpha`` for an unnormalized log-density
``log pi~``.  Proposals are ``y ~ N(x + step * alpha * A grad log pi~(x) / 2, step * A)``
with a positive definite scale matrix ``A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import stats

from .numerics import SpdMatrix, as_generator, cholesky
from .student import StudentParams

__all__ = [
    "TargetOracle",
    "MalaState",
    "ChainResult",
    "default_step",
    "init_state",
    "log_acceptance",
    "log_acceptance_reference",
    "mala_step",
    "mala_chain",
    "uniform_start",
]


@dataclass(frozen=True)
class TargetOracle:
    """Unnormalized log-density of ``pi`` and its gradient on R^d."""

    log_unnormalized: Callable[[np.ndarray], float]
    grad_log_unnormalized: Callable[[np.ndarray], np.ndarray]
    d: int

    @classmethod
    def from_student(cls, p: StudentParams) -> TargetOracle:
        """Oracle for a Student (or Gaussian) target, normalizing constant dropped."""
        nu, d, sigma, mu = p.nu, p.d, p.sigma, p.mu

        if p.is_gaussian:
            def logf(x):
                return -0.5 * sigma.quad_form(np.asarray(x, dtype=float) - mu)

            def grad(x):
                return -sigma.solve(np.asarray(x, dtype=float) - mu)
        else:
            def logf(x):
                return -0.5 * (nu + d) * math.log1p(sigma.quad_form(np.asarray(x, dtype=float) - mu) / nu)

            def grad(x):
                diff = np.asarray(x, dtype=float) - mu
                return -(nu + d) / (nu + sigma.quad_form(diff)) * sigma.solve(diff)

        return cls(logf, grad, d)

    def gradient_error(self, x, h: float = 1e-5) -> float:
        """Relative deviation of the gradient from central differences at ``x``."""
        x = np.asarray(x, dtype=float)
        fd = np.empty(self.d)
        for i in range(self.d):
            e = np.zeros(self.d)
            e[i] = h
            fd[i] = (self.log_unnormalized(x + e) - self.log_unnormalized(x - e)) / (2.0 * h)
        g = np.asarray(self.grad_log_unnormalized(x), dtype=float)
        return float(np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-3))


def default_step(d: int) -> float:
    """``0.574^2 / d^(1/3)``."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return 0.574**2 / d ** (1.0 / 3.0)


@dataclass(frozen=True, eq=False)
class MalaState:
    """Current point of a chain with cached target value and gradient."""

    x: np.ndarray
    alpha: float
    step: float
    scale: SpdMatrix
    accepted_count: int = 0
    proposed_count: int = 0
    log_target: float = math.nan
    grad: np.ndarray | None = None
    nonfinite_count: int = 0
    diagnostic: str = ""

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not 0 <= self.accepted_count <= self.proposed_count:
            raise ValueError("need 0 <= accepted_count <= proposed_count")
        if not isinstance(self.scale, SpdMatrix):
            object.__setattr__(self, "scale", cholesky(self.scale))
        if self.scale.dim != np.size(self.x):
            raise ValueError("scale matrix and state dimension differ")

    @property
    def acceptance_rate(self) -> float:
        return self.accepted_count / self.proposed_count if self.proposed_count else math.nan


def init_state(oracle: TargetOracle, x0, alpha: float, step: float | None = None,
               scale: SpdMatrix | None = None) -> MalaState:
    x0 = np.array(x0, dtype=float).reshape(oracle.d)
    scale = SpdMatrix.identity(oracle.d) if scale is None else scale
    step = default_step(oracle.d) if step is None else step
    lp = float(oracle.log_unnormalized(x0))
    g = np.asarray(oracle.grad_log_unnormalized(x0), dtype=float)
    if not (math.isfinite(lp) and np.all(np.isfinite(g))):
        raise ValueError("target log-density or gradient is not finite at the initial point")
    return MalaState(x0, alpha, step, scale, log_target=lp, grad=g)


def uniform_start(d: int, rng, half_width: float = 5.0) -> np.ndarray:
    """Initial point uniform on ``[-half_width, half_width]^d``."""
    return as_generator(rng).uniform(-half_width, half_width, size=d)


def _drift_mean(x, g, alpha, step, scale: SpdMatrix):
    return x + 0.5 * step * alpha * (scale.matrix @ g)


def log_acceptance(x, y, lp_x, lp_y, g_x, g_y, alpha, step, scale: SpdMatrix) -> float:
    """Log Metropolis-Hastings ratio for the move ``x -> y`` (Gaussian constants cancel)."""
    fwd = y - _drift_mean(x, g_x, alpha, step, scale)
    bwd = x - _drift_mean(y, g_y, alpha, step, scale)
    return alpha * (lp_y - lp_x) - 0.5 * (scale.quad_form(bwd) - scale.quad_form(fwd)) / step


def log_acceptance_reference(oracle: TargetOracle, x, y, alpha, step, scale: SpdMatrix) -> float:
    """Same ratio assembled from full log-densities of target and kernels."""
    cov = step * np.asarray(scale.matrix)
    gx = oracle.grad_log_unnormalized(x)
    gy = oracle.grad_log_unnormalized(y)
    k_fwd = stats.multivariate_normal.logpdf(y, mean=x + 0.5 * step * alpha * cov @ gx / step, cov=cov)
    k_bwd = stats.multivariate_normal.logpdf(x, mean=y + 0.5 * step * alpha * cov @ gy / step, cov=cov)
    t_x = alpha * oracle.log_unnormalized(x)
    t_y = alpha * oracle.log_unnormalized(y)
    return float((t_y + k_bwd) - (t_x + k_fwd))


def _transition(oracle, x, lp_x, g_x, alpha, step, scale: SpdMatrix, z, u):
    """Return ``(x', lp', g', accepted, finite)`` for one proposal."""
    A, L, Linv = scale.matrix, scale.chol, scale.chol_inv
    h = 0.5 * step * alpha
    y = x + h * (A @ g_x) + math.sqrt(step) * (L @ z)
    lp_y = float(oracle.log_unnormalized(y))
    if not math.isfinite(lp_y):
        return x, lp_x, g_x, False, False
    g_y = np.asarray(oracle.grad_log_unnormalized(y), dtype=float)
    if not np.isfinite(g_y).all():
        return x, lp_x, g_x, False, False
    fwd = Linv @ (y - x - h * (A @ g_x))
    bwd = Linv @ (x - y - h * (A @ g_y))
    log_a = alpha * (lp_y - lp_x) - 0.5 * (bwd @ bwd - fwd @ fwd) / step
    if math.log(u) < log_a:
        return y, lp_y, g_y, True, True
    return x, lp_x, g_x, False, True


def _advance(state: MalaState, oracle: TargetOracle, z: np.ndarray, u: float) -> MalaState:
    x, lp, g, acc, finite = _transition(oracle, state.x, state.log_target, state.grad, state.alpha,
                                        state.step, state.scale, z, u)
    if not finite:
        return replace(state, proposed_count=state.proposed_count + 1,
                       nonfinite_count=state.nonfinite_count + 1, diagnostic="non-finite proposal rejected")
    return replace(state, x=x, log_target=lp, grad=g, accepted_count=state.accepted_count + int(acc),
                   proposed_count=state.proposed_count + 1)


def mala_step(state: MalaState, oracle: TargetOracle, rng) -> MalaState:
    """One proposal plus accept/reject; a rejected move keeps ``x``."""
    if state.grad is None or not math.isfinite(state.log_target):
        state = replace(state, log_target=float(oracle.log_unnormalized(state.x)),
                        grad=np.asarray(oracle.grad_log_unnormalized(state.x), dtype=float))
    gen = as_generator(rng)
    z = gen.standard_normal(oracle.d)
    u = gen.random()
    return _advance(state, oracle, z, u)


@dataclass(frozen=True, eq=False)
class ChainResult:
    samples: np.ndarray
    acceptance_rate: float
    state: MalaState


def mala_chain(oracle: TargetOracle, alpha: float, n_steps: int, init_x=None, scale: SpdMatrix | None = None,
               step: float | None = None, rng=None, *, state: MalaState | None = None) -> ChainResult:
    """Run ``n_steps`` MALA steps and return every post-step state.

    Pass ``state`` to continue an existing chain (its counters carry over and
    ``scale``/``step`` replace the stored ones when given).  The acceptance
    rate covers the steps of this call only.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    gen = as_generator(rng)
    if state is None:
        if init_x is None:
            raise ValueError("either init_x or state is required")
        state = init_state(oracle, init_x, alpha, step, scale)
    else:
        changes = {"alpha": alpha}
        if scale is not None:
            changes["scale"] = scale
        if step is not None:
            changes["step"] = step
        state = replace(state, **changes)
    z = gen.standard_normal((n_steps, oracle.d))
    u = gen.random(n_steps)
    out = np.empty((n_steps, oracle.d))
    x, lp, g = state.x, state.log_target, state.grad
    alpha, step, sc = state.alpha, state.step, state.scale
    n_acc = n_bad = 0
    for i in range(n_steps):
        x, lp, g, acc, finite = _transition(oracle, x, lp, g, alpha, step, sc, z[i], u[i])
        n_acc += acc
        n_bad += not finite
        out[i] = x
    state = replace(
        state, x=np.array(x), log_target=lp, grad=g,
        accepted_count=state.accepted_count + n_acc,
        proposed_count=state.proposed_count + n_steps,
        nonfinite_count=state.nonfinite_count + n_bad,
        diagnostic=f"{n_bad} non-finite proposals rejected" if n_bad else state.diagnostic,
    )
    return ChainResult(out, n_acc / n_steps, state)
