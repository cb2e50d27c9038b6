"""Multivariate Student family as a lambda-exponential family.

With ``T(x) = (x, x x^T)`` and ``lam = -2 / (nu + d)`` the Student densities
``q(x) ~ (1 + (x - mu)^T Sigma^{-1} (x - mu) / nu)^{-(nu + d) / 2}`` are exactly
``exp(c_lam(theta, T(x)) - phi_lam(theta))``.  ``nu = inf`` is the Gaussian
limit (``lam = 0``) and is carried as its own branch throughout.

The pairing between natural parameters and moments is
``<theta, m> = theta1 . m1 + trace(theta2 @ M2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .duality import coupling_from_inner
from .numerics import NotPositiveDefiniteError, SpdMatrix, as_generator, cholesky, log_gamma

__all__ = [
    "DomainError",
    "IncompatibleError",
    "StudentParams",
    "NaturalParams",
    "SufficientMoments",
    "family_lambda",
    "family_alpha",
    "log_normalizer",
    "compatibility_value",
    "is_compatible",
    "natural_from_params",
    "params_from_natural",
    "log_partition",
    "pair_inner",
    "coupling",
    "renyi_entropy",
    "entropy_function",
    "escort",
    "escort_power",
    "escort_moments",
    "params_from_escort_moments",
    "covariance",
    "log_density",
    "grad_log_density",
    "sample",
]


class DomainError(ValueError):
    """Natural parameters outside the domain of the log-partition function."""


class IncompatibleError(ValueError):
    """A target's escort lacks the first/second moments the family needs."""


def family_lambda(nu: float, d: int) -> float:
    return 0.0 if math.isinf(nu) else -2.0 / (nu + d)


def family_alpha(nu: float, d: int) -> float:
    """Escort exponent ``1 - lam`` tied to the family with ``nu`` degrees of freedom."""
    return 1.0 - family_lambda(nu, d)


def log_normalizer(nu: float, d: int) -> float:
    """``log Z_nu`` with ``Z_nu = Gamma(nu/2) (nu pi)^{d/2} / Gamma((nu+d)/2)``; Gaussian: ``(d/2) log 2pi``."""
    if math.isinf(nu):
        return 0.5 * d * math.log(2.0 * math.pi)
    return log_gamma(nu / 2.0) - log_gamma((nu + d) / 2.0) + 0.5 * d * math.log(nu * math.pi)


def compatibility_value(nu_target: float, nu_family: float, d: int) -> float:
    """Left-hand side of ``nu_pi + 2 (nu_pi + d) / (nu + d) > 2``.

    This is the degrees of freedom of the target's escort; the target is
    compatible with the family iff it exceeds 2.
    """
    if math.isinf(nu_target):
        return math.inf
    if math.isinf(nu_family):
        return nu_target
    return nu_target + 2.0 * (nu_target + d) / (nu_family + d)


def is_compatible(nu_target: float, nu_family: float, d: int) -> bool:
    return compatibility_value(nu_target, nu_family, d) > 2.0


def _as_nu(nu) -> float:
    if isinstance(nu, str):
        nu = float(nu.strip().lower().replace("+", ""))
    nu = float(nu)
    if not nu > 0:
        raise ValueError(f"degrees of freedom must be positive, got {nu}")
    return nu


@dataclass(frozen=True, eq=False)
class StudentParams:
    """Degrees of freedom, location and scale of a Student (or Gaussian) law."""

    nu: float
    mu: np.ndarray
    sigma: SpdMatrix

    def __post_init__(self):
        object.__setattr__(self, "nu", _as_nu(self.nu))
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float)).copy()
        if mu.ndim != 1:
            raise ValueError("location must be a vector")
        sigma = self.sigma if isinstance(self.sigma, SpdMatrix) else cholesky(self.sigma)
        if sigma.dim != mu.size:
            raise ValueError(f"dimension mismatch: mu has {mu.size} entries, sigma is {sigma.dim}x{sigma.dim}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def gaussian(cls, mu, sigma) -> StudentParams:
        return cls(math.inf, mu, sigma)

    @property
    def d(self) -> int:
        return self.mu.size

    @property
    def is_gaussian(self) -> bool:
        return math.isinf(self.nu)

    @property
    def lam(self) -> float:
        return family_lambda(self.nu, self.d)

    @property
    def alpha(self) -> float:
        return 1.0 - self.lam

    @property
    def log_z(self) -> float:
        return log_normalizer(self.nu, self.d)

    def with_nu(self, nu: float) -> StudentParams:
        return StudentParams(nu, self.mu, self.sigma)

    def __repr__(self):
        return f"StudentParams(nu={self.nu}, mu={np.array2string(self.mu, precision=4)}, sigma={self.sigma!r})"


@dataclass(frozen=True, eq=False)
class NaturalParams:
    """``theta = (theta1, theta2)`` with ``theta2`` negative definite."""

    theta1: np.ndarray
    theta2: np.ndarray
    lam: float

    def __post_init__(self):
        t1 = np.atleast_1d(np.asarray(self.theta1, dtype=float)).copy()
        t2 = np.atleast_2d(np.asarray(self.theta2, dtype=float)).copy()
        if t2.shape != (t1.size, t1.size):
            raise ValueError(f"theta2 must be {t1.size}x{t1.size}, got {t2.shape}")
        t2 = 0.5 * (t2 + t2.T)
        try:
            neg = cholesky(-t2)
        except NotPositiveDefiniteError as exc:
            raise DomainError("theta2 is not negative definite") from exc
        t1.setflags(write=False)
        t2.setflags(write=False)
        object.__setattr__(self, "theta1", t1)
        object.__setattr__(self, "theta2", t2)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "_neg_theta2", neg)

    @property
    def d(self) -> int:
        return self.theta1.size

    @property
    def alpha(self) -> float:
        return 1.0 - self.lam

    def quad(self) -> float:
        """``theta1^T theta2^{-1} theta1`` (always <= 0)."""
        return -self._neg_theta2.quad_form(self.theta1)

    def domain_value(self, nu: float) -> float:
        """``2 (nu + d) + theta1^T theta2^{-1} theta1``; positive inside the domain."""
        return 2.0 * (nu + self.d) + self.quad()

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.theta1, self.theta2.ravel()])


@dataclass(frozen=True, eq=False)
class SufficientMoments:
    """Expectations ``(E[x], E[x x^T])`` of the sufficient statistic."""

    m1: np.ndarray
    M2: np.ndarray

    def __post_init__(self):
        m1 = np.atleast_1d(np.asarray(self.m1, dtype=float)).copy()
        M2 = np.atleast_2d(np.asarray(self.M2, dtype=float)).copy()
        if M2.shape != (m1.size, m1.size):
            raise ValueError(f"M2 must be {m1.size}x{m1.size}, got {M2.shape}")
        M2 = 0.5 * (M2 + M2.T)
        m1.setflags(write=False)
        M2.setflags(write=False)
        object.__setattr__(self, "m1", m1)
        object.__setattr__(self, "M2", M2)

    @classmethod
    def from_samples(cls, x, weights=None) -> SufficientMoments:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if weights is None:
            w = np.full(x.shape[0], 1.0 / x.shape[0])
        else:
            w = np.asarray(weights, dtype=float)
            w = w / w.sum()
        m1 = w @ x
        M2 = (x * w[:, None]).T @ x
        return cls(m1, M2)

    @classmethod
    def of_point(cls, x) -> SufficientMoments:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x, np.outer(x, x))

    @property
    def d(self) -> int:
        return self.m1.size

    def centered(self) -> np.ndarray:
        """``M2 - m1 m1^T``."""
        C = self.M2 - np.outer(self.m1, self.m1)
        return 0.5 * (C + C.T)

    def combine(self, other: SufficientMoments, w_self: float, w_other: float) -> SufficientMoments:
        return SufficientMoments(w_self * self.m1 + w_other * other.m1, w_self * self.M2 + w_other * other.M2)

    def distance(self, other: SufficientMoments) -> float:
        return float(np.sqrt(np.sum((self.m1 - other.m1) ** 2) + np.sum((self.M2 - other.M2) ** 2)))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.m1, self.M2.ravel()])


def natural_from_params(p: StudentParams) -> NaturalParams:
    """``theta1 = (nu+d)/(nu+m) Sigma^{-1} mu``, ``theta2 = -(nu+d)/(2(nu+m)) Sigma^{-1}`` with ``m = mu^T Sigma^{-1} mu``."""
    if p.is_gaussian:
        raise ValueError("natural parameters are only charted for finite degrees of freedom")
    nu, d = p.nu, p.d
    sinv_mu = p.sigma.solve(p.mu)
    m = float(p.mu @ sinv_mu)
    c = (nu + d) / (nu + m)
    return NaturalParams(c * sinv_mu, -0.5 * c * p.sigma.inverse, p.lam)


def params_from_natural(n: NaturalParams, nu: float) -> StudentParams:
    """Inverse chart: ``mu = -theta2^{-1} theta1 / 2``, ``Sigma = -dom / (4 nu) theta2^{-1}``."""
    nu = _as_nu(nu)
    if math.isinf(nu):
        raise ValueError("natural parameters are only charted for finite degrees of freedom")
    _check_lambda(n, nu)
    dom = n.domain_value(nu)
    if not dom > 0:
        raise DomainError(f"2(nu+d) + theta1^T theta2^-1 theta1 = {dom:.6g} <= 0")
    neg = n._neg_theta2
    mu = 0.5 * neg.solve(n.theta1)
    # Sigma = dom/(4 nu) * (-theta2)^{-1}, kept in factored form
    Linv = np.linalg.inv(neg.chol)
    sigma_mat = (dom / (4.0 * nu)) * (Linv.T @ Linv)
    return StudentParams(nu, mu, cholesky(0.5 * (sigma_mat + sigma_mat.T)))


def _check_lambda(n: NaturalParams, nu: float):
    expected = family_lambda(nu, n.d)
    if abs(n.lam - expected) > 1e-12 * max(1.0, abs(expected)):
        raise ValueError(f"natural parameters carry lam={n.lam}, family nu={nu} needs lam={expected}")


def log_partition(n: NaturalParams, nu: float) -> float:
    """Closed-form lambda-log-partition of the Student family."""
    nu = _as_nu(nu)
    _check_lambda(n, nu)
    d = n.d
    dom = n.domain_value(nu)
    if not dom > 0:
        raise DomainError(f"2(nu+d) + theta1^T theta2^-1 theta1 = {dom:.6g} <= 0")
    logdet_neg_inv = -n._neg_theta2.logdet
    return (
        -0.5 * d * math.log(4.0 * nu)
        + 0.5 * logdet_neg_inv
        + 0.5 * (nu + d) * math.log(2.0 * (nu + d))
        - 0.5 * nu * math.log(dom)
        + log_normalizer(nu, d)
    )


def pair_inner(n: NaturalParams, m: SufficientMoments) -> float:
    if n.d != m.d:
        raise ValueError(f"dimension mismatch: {n.d} vs {m.d}")
    return float(n.theta1 @ m.m1 + np.sum(n.theta2 * m.M2))


def coupling(n: NaturalParams, m: SufficientMoments) -> float:
    """``c_lam(theta, m)`` under the moment pairing."""
    return coupling_from_inner(n.lam, pair_inner(n, m))


def renyi_entropy(p: StudentParams, alpha: float) -> float:
    """Closed-form Renyi entropy ``H_alpha(p)``; Shannon entropy at ``alpha = 1``.

    For a Student law ``p^alpha`` is an unnormalized Student with
    ``nu' = alpha (nu + d) - d`` degrees of freedom, which must be positive.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    d = p.d
    half_logdet = 0.5 * p.sigma.logdet
    if p.is_gaussian:
        if alpha == 1:
            return 0.5 * d * math.log(2.0 * math.pi * math.e) + half_logdet
        return 0.5 * d * math.log(2.0 * math.pi) + half_logdet + 0.5 * d * math.log(alpha) / (alpha - 1.0)
    nu = p.nu
    logz = log_normalizer(nu, d)
    if alpha == 1:
        return logz + half_logdet + 0.5 * (nu + d) * (digamma(0.5 * (nu + d)) - digamma(0.5 * nu))
    nu_p = alpha * (nu + d) - d
    if not nu_p > 0:
        raise ValueError(f"integral of p^alpha diverges: alpha (nu + d) = {alpha * (nu + d):.6g} <= d = {d}")
    log_int = log_normalizer(nu_p, d) + 0.5 * d * math.log(nu / nu_p) + (1.0 - alpha) * half_logdet - alpha * logz
    return log_int / (1.0 - alpha)


def entropy_function(p: StudentParams) -> float:
    """``psi_lam = -H_alpha(q)`` at the family's own exponent ``alpha = 1 - lam``.

    Equals ``-logdet(Sigma)/2`` plus a constant that depends on ``(nu, d)`` only.
    """
    return -renyi_entropy(p, p.alpha)


def escort_power(p: StudentParams, alpha: float) -> StudentParams:
    """Law of ``p^alpha / int p^alpha``; again Student (or Gaussian)."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if alpha == 1:
        return p
    if p.is_gaussian:
        return StudentParams(math.inf, p.mu, p.sigma.scaled(1.0 / alpha))
    nu_a = alpha * (p.nu + p.d) - p.d
    if not nu_a > 0:
        raise ValueError(f"escort with alpha={alpha} is not normalizable (nu^(alpha)={nu_a:.6g})")
    return StudentParams(nu_a, p.mu, p.sigma.scaled(p.nu / nu_a))


def escort(p: StudentParams, nu_q: float | None = None) -> StudentParams:
    """Escort of ``p`` at the exponent ``1 + 2/(nu_q + d)`` of the approximating family.

    ``nu_q`` defaults to ``p.nu`` (within-family escort).
    """
    nu_q = p.nu if nu_q is None else _as_nu(nu_q)
    return escort_power(p, family_alpha(nu_q, p.d))


def covariance(p: StudentParams) -> np.ndarray:
    if p.is_gaussian:
        return np.array(p.sigma.matrix)
    if not p.nu > 2:
        raise IncompatibleError(f"covariance undefined for nu={p.nu:.6g} <= 2")
    return p.nu / (p.nu - 2.0) * p.sigma.matrix


def escort_moments(p: StudentParams, nu_q: float | None = None) -> SufficientMoments:
    """``(E[x], E[x x^T])`` under the escort of ``p`` for the ``nu_q`` family.

    Raises:
        IncompatibleError: when the escort has no second moment.
    """
    nu_q = p.nu if nu_q is None else _as_nu(nu_q)
    if not is_compatible(p.nu, nu_q, p.d):
        raise IncompatibleError(
            f"escort degrees of freedom {compatibility_value(p.nu, nu_q, p.d):.6g} <= 2 "
            f"(nu_p={p.nu}, nu_q={nu_q}, d={p.d})"
        )
    e = escort(p, nu_q)
    return SufficientMoments(e.mu, covariance(e) + np.outer(e.mu, e.mu))


def params_from_escort_moments(nu: float, m: SufficientMoments, eig_floor: float | None = None) -> StudentParams:
    """Moment matching: ``mu = m1``, ``Sigma = M2 - m1 m1^T``.

    ``eig_floor`` (off by default) clips the eigenvalues of the candidate
    scale from below, for Monte Carlo moments that are numerically singular.
    """
    S = m.centered()
    if eig_floor is not None:
        w, V = np.linalg.eigh(S)
        S = (V * np.maximum(w, eig_floor)) @ V.T
    try:
        sigma = cholesky(0.5 * (S + S.T))
    except NotPositiveDefiniteError as exc:
        smallest = float(np.linalg.eigvalsh(S)[0])
        raise NotPositiveDefiniteError(exc.pivot, f"candidate scale has smallest eigenvalue {smallest:.6g}") from exc
    return StudentParams(nu, m.m1, sigma)


def _mahalanobis(p: StudentParams, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.d:
        if p.d == 1 and (x.ndim == 0 or x.ndim == 1):
            x = x.reshape(-1, 1) if x.ndim == 1 else x.reshape(1)
        else:
            raise ValueError(f"points must have trailing dimension {p.d}, got shape {x.shape}")
    diff = x - p.mu
    return diff, np.asarray(p.sigma.quad_form(diff))


def log_density(p: StudentParams, x):
    """Log-density at a point ``(d,)`` or a batch ``(n, d)``."""
    _, q = _mahalanobis(p, x)
    d = p.d
    if p.is_gaussian:
        out = -0.5 * d * math.log(2.0 * math.pi) - 0.5 * p.sigma.logdet - 0.5 * q
    else:
        out = -p.log_z - 0.5 * p.sigma.logdet - 0.5 * (p.nu + d) * np.log1p(q / p.nu)
    return float(out) if np.ndim(out) == 0 else out


def grad_log_density(p: StudentParams, x) -> np.ndarray:
    diff, q = _mahalanobis(p, x)
    sinv_diff = p.sigma.solve(diff.T).T
    if p.is_gaussian:
        return -sinv_diff
    factor = (p.nu + p.d) / (p.nu + q)
    return -(factor[..., None] if np.ndim(factor) else factor) * sinv_diff


def sample(p: StudentParams, n: int, rng) -> np.ndarray:
    """``n`` draws as an ``(n, d)`` array: ``mu + L z sqrt(nu / w)``, ``w ~ chi2(nu)``."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    gen = as_generator(rng)
    z = gen.standard_normal((n, p.d)) @ p.sigma.chol.T
    if not p.is_gaussian:
        w = gen.chisquare(p.nu, size=n)
        z *= np.sqrt(p.nu / w)[:, None]
    return p.mu + z
