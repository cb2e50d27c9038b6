"""Renyi and Kullback-Leibler divergences between Student/Gaussian laws.

``RD_alpha(p, q) = log(int p^alpha q^(1 - alpha)) / (alpha - 1)``.  The closed
form goes through the lambda-duality rewriting
``RD_alpha(pi, q_theta) = phi(theta) - c_lam(theta, E_{pi^(alpha)}[T]) - H_alpha(pi)``;
quadrature (d = 1) and Monte Carlo estimators serve as independent checks.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .duality import DEFAULT_QUAD_TOL, integrate_line
from .numerics import as_generator
from .student import (
    StudentParams,
    coupling,
    covariance,
    escort_moments,
    log_density,
    log_partition,
    natural_from_params,
    renyi_entropy,
)

__all__ = [
    "Method",
    "DivergenceReport",
    "DegenerateWeightsWarning",
    "renyi_divergence_closed",
    "kl_closed",
    "renyi_divergence_quadrature_1d",
    "renyi_divergence_student_1d",
    "renyi_divergence_mc",
]

# closed-form values are differences of O(d log d) terms; anything below this
# (relative to the largest term) is treated as a roundoff zero
_ROUNDOFF = 1e-12


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    QUADRATURE_1D = "quadrature_1d"
    MONTE_CARLO = "monte_carlo"


class DegenerateWeightsWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DivergenceReport:
    """A divergence value with its provenance.

    ``stderr`` and ``ess`` (effective sample size of the importance weights)
    are set only for Monte Carlo estimates.
    """

    alpha: float
    value: float
    method: Method
    stderr: float | None = None
    ess: float | None = None
    diagnostic: str = ""

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if (self.stderr is not None) != (self.method is Method.MONTE_CARLO):
            raise ValueError("stderr is reported exactly for Monte Carlo estimates")
        if self.method is not Method.MONTE_CARLO and self.value < -_ROUNDOFF:
            raise ValueError(f"negative divergence {self.value:.3e} from {self.method.value}")

    def __float__(self):
        return float(self.value)


def _clip_roundoff(value: float, scale: float) -> float:
    if -_ROUNDOFF * max(1.0, scale) < value < 0.0:
        return 0.0
    return value


def kl_closed(pi: StudentParams, q: StudentParams) -> DivergenceReport:
    """``KL(pi || q)`` for a Gaussian ``q``; ``pi`` needs a finite covariance."""
    if not q.is_gaussian:
        raise ValueError("kl_closed expects a Gaussian approximating law")
    if pi.d != q.d:
        raise ValueError(f"dimension mismatch: {pi.d} vs {q.d}")
    h = renyi_entropy(pi, 1.0)
    diff = pi.mu - q.mu
    cross = 0.5 * (q.d * math.log(2.0 * math.pi) + q.sigma.logdet)
    cross += 0.5 * (float(np.trace(q.sigma.solve(covariance(pi)))) + q.sigma.quad_form(diff))
    value = _clip_roundoff(cross - h, abs(cross) + abs(h))
    return DivergenceReport(1.0, value, Method.CLOSED_FORM)


def renyi_divergence_closed(pi: StudentParams, q: StudentParams) -> DivergenceReport:
    """``RD_alpha(pi, q)`` with ``alpha = 1 + 2/(nu_q + d)`` tied to ``q``'s family.

    A Gaussian ``q`` gives ``alpha = 1`` and the KL divergence.

    Raises:
        IncompatibleError: if the escort of ``pi`` at ``alpha`` has no second moment.
    """
    if pi.d != q.d:
        raise ValueError(f"dimension mismatch: {pi.d} vs {q.d}")
    if q.is_gaussian:
        return kl_closed(pi, q)
    alpha = q.alpha
    theta = natural_from_params(q)
    phi = log_partition(theta, q.nu)
    c = coupling(theta, escort_moments(pi, q.nu))
    h = renyi_entropy(pi, alpha)
    value = phi - c - h
    value = _clip_roundoff(value, abs(phi) + abs(c) + abs(h))
    return DivergenceReport(alpha, value, Method.CLOSED_FORM)


def renyi_divergence_quadrature_1d(
    log_p: Callable[[float], float],
    log_q: Callable[[float], float],
    alpha: float,
    quad_tol: float = DEFAULT_QUAD_TOL,
    *,
    center: float = 0.0,
    scale: float = 1.0,
    breakpoints=(),
) -> DivergenceReport:
    """Renyi divergence of two normalized 1-D log-densities by quadrature.

    ``alpha = 1`` integrates ``p (log p - log q)`` instead.

    Raises:
        ValueError: if the integral diverges or quadrature fails.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if alpha == 1:
        def f(x):
            lp, lq = float(log_p(x)), float(log_q(x))
            return 0.0 if lp == -math.inf else math.exp(lp) * (lp - lq)

        res = integrate_line(f, center=center, scale=scale, tol=quad_tol, breakpoints=breakpoints)
        if not res.ok:
            raise ValueError(f"KL integral failed: {res.message}")
        return DivergenceReport(1.0, _clip_roundoff(res.value, 1.0), Method.QUADRATURE_1D)

    def log_integrand(x):
        lp, lq = float(log_p(x)), float(log_q(x))
        if lp == -math.inf:
            return -math.inf
        return alpha * lp + (1.0 - alpha) * lq

    ref = log_integrand(center)
    if not math.isfinite(ref):
        ref = 0.0
    res = integrate_line(lambda x: math.exp(log_integrand(x) - ref), center=center, scale=scale,
                         tol=quad_tol, breakpoints=breakpoints)
    if not res.ok or res.value <= 0:
        raise ValueError(f"int p^alpha q^(1-alpha) diverges or failed: {res.message}")
    value = (ref + math.log(res.value)) / (alpha - 1.0)
    return DivergenceReport(alpha, _clip_roundoff(value, 1.0), Method.QUADRATURE_1D)


def renyi_divergence_student_1d(pi: StudentParams, q: StudentParams, alpha: float | None = None,
                                quad_tol: float = DEFAULT_QUAD_TOL) -> DivergenceReport:
    """Quadrature divergence for two 1-D Student/Gaussian laws (``alpha`` defaults to ``q.alpha``)."""
    if pi.d != 1 or q.d != 1:
        raise ValueError("quadrature divergence is one-dimensional")
    alpha = q.alpha if alpha is None else alpha
    s_pi = math.sqrt(pi.sigma.matrix[0, 0])
    s_q = math.sqrt(q.sigma.matrix[0, 0])
    m_pi, m_q = float(pi.mu[0]), float(q.mu[0])
    return renyi_divergence_quadrature_1d(
        lambda x: log_density(pi, np.array([x])),
        lambda x: log_density(q, np.array([x])),
        alpha,
        quad_tol,
        center=0.5 * (m_pi + m_q),
        scale=max(s_pi, s_q),
        breakpoints=(m_pi, m_q),
    )


def renyi_divergence_mc(
    pi_sampler: Callable[[int, np.random.Generator], np.ndarray],
    log_pi: Callable[[np.ndarray], np.ndarray],
    log_q: Callable[[np.ndarray], np.ndarray],
    alpha: float,
    n: int,
    rng,
) -> DivergenceReport:
    """Monte Carlo estimate from ``n`` draws of ``pi`` with a jackknife standard error.

    For ``alpha != 1`` the estimate is ``log(mean w) / (alpha - 1)`` with
    ``w = (pi / q)^(alpha - 1)``; for ``alpha = 1`` it is ``mean(log pi - log q)``.
    An effective sample size of the weights below 10 is flagged.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    gen = as_generator(rng)
    x = pi_sampler(n, gen)
    r = np.asarray(log_pi(x), dtype=float) - np.asarray(log_q(x), dtype=float)
    if alpha == 1:
        value = float(np.mean(r))
        # the jackknife of a mean is the classical standard error
        stderr = float(np.std(r, ddof=1) / math.sqrt(n))
        return DivergenceReport(1.0, value, Method.MONTE_CARLO, stderr=stderr, ess=float(n))

    lw = (alpha - 1.0) * r
    shift = float(np.max(lw))
    w = np.exp(lw - shift)
    total = float(np.sum(w))
    value = (math.log(total / n) + shift) / (alpha - 1.0)
    ess = total**2 / float(np.sum(w * w))
    loo = np.log((total - w) / (n - 1)) + shift
    loo /= alpha - 1.0
    stderr = float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    diagnostic = ""
    if ess < 10:
        diagnostic = f"importance weights degenerate (effective sample size {ess:.3g})"
        warnings.warn(diagnostic, DegenerateWeightsWarning, stacklevel=2)
    return DivergenceReport(alpha, value, Method.MONTE_CARLO, stderr=stderr, ess=ess, diagnostic=diagnostic)
