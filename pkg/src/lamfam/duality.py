"""The lambda-deformed coupling and generic one-dimensional families.

The coupling ``c_lam(u, v) = log(1 + lam <u, v>) / lam`` replaces the inner
product of ordinary exponential families.  Conventions: ``log(s) = -inf`` for
``s <= 0`` and ``exp(-inf) = 0``, so points outside the support get density
zero rather than an exception.

One-dimensional families are normalized by adaptive quadrature after the
substitution ``x = center + scale * tan(t)``; the integrands here decay
polynomially and truncating the real line would bias the tails.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

__all__ = [
    "DEFAULT_QUAD_TOL",
    "DivergentIntegralWarning",
    "QuadResult",
    "Scalar1DFamily",
    "Density1D",
    "coupling_eval",
    "coupling_from_inner",
    "coupling_convexity_residual",
    "integrate_line",
    "log_partition_1d",
    "density_1d",
    "escort_density_1d",
    "fenchel_young_residual",
]

DEFAULT_QUAD_TOL = 1e-10


class DivergentIntegralWarning(RuntimeWarning):
    pass


def coupling_from_inner(lam: float, s):
    """Coupling value given the inner product ``s = <u, v>`` (vectorized)."""
    s = np.asarray(s, dtype=float)
    if lam == 0:
        out = s
    else:
        ls = lam * s
        # log1p keeps full precision when lam * s is tiny
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(ls > -1.0, np.log1p(np.where(ls > -1.0, ls, 0.0)) / lam, -np.inf)
    return float(out) if out.ndim == 0 else out


def coupling_eval(lam: float, u, v) -> float:
    u = np.ravel(np.asarray(u, dtype=float))
    v = np.ravel(np.asarray(v, dtype=float))
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.size} vs {v.size}")
    return coupling_from_inner(lam, float(u @ v))


def coupling_convexity_residual(lam: float, u, v1, v2, s: float) -> float:
    """Signed gap ``c(s v1 + (1-s) v2, u) - [s c(v1, u) + (1-s) c(v2, u)]``.

    Non-negative for lam > 0 (concave in the first argument), non-positive
    for lam < 0 (convex), zero for lam = 0.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {s}")
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    c1 = coupling_eval(lam, v1, u)
    c2 = coupling_eval(lam, v2, u)
    cm = coupling_eval(lam, s * v1 + (1.0 - s) * v2, u)
    if not all(map(math.isfinite, (c1, c2, cm))):
        raise ValueError("coupling is not finite at the supplied points")
    if lam == 0:
        return 0.0
    return cm - (s * c1 + (1.0 - s) * c2)


def fenchel_young_residual(phi: float, psi: float, coupling_value: float) -> float:
    """``phi + psi - c``; zero exactly at a subgradient pair, positive otherwise."""
    for name, val in (("phi", phi), ("psi", psi), ("coupling_value", coupling_value)):
        if not math.isfinite(val):
            raise ValueError(f"{name} must be finite, got {val}")
    return phi + psi - coupling_value


@dataclass(frozen=True)
class QuadResult:
    value: float
    abserr: float
    ok: bool
    message: str = ""


def _tail_exponent(f, center, scale):
    """Power-law decay rate of ``f`` on each side, estimated between 1e6 and 1e12 scales."""
    rates = []
    for sign in (-1.0, 1.0):
        f1 = abs(float(f(center + sign * 1e6 * scale)))
        f2 = abs(float(f(center + sign * 1e12 * scale)))
        if f1 <= 0.0 or f2 <= 0.0:
            rates.append(math.inf)
        else:
            rates.append(-math.log(f2 / f1) / math.log(1e6))
    return min(rates)


def integrate_line(
    f: Callable,
    *,
    center: float = 0.0,
    scale: float = 1.0,
    tol: float = DEFAULT_QUAD_TOL,
    breakpoints=(),
    limit: int = 500,
) -> QuadResult:
    """Integrate ``f`` over the real line.

    The tangent substitution maps the line onto (-pi/2, pi/2), where QUADPACK's
    adaptive Gauss-Kronrod rule runs with absolute tolerance ``tol``.
    Integrals whose tails decay no faster than ``1/|x|`` are reported as
    divergent (``ok=False``, ``value=inf``).
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    rate = _tail_exponent(f, center, scale)
    if rate <= 1.0 + 1e-6:
        return QuadResult(math.inf, math.inf, False, f"integrand tail decays like |x|^-{rate:.4g}; integral diverges")

    def g(t):
        c = math.cos(t)
        if c <= 0.0:
            return 0.0
        return float(f(center + scale * math.tan(t))) * scale / (c * c)

    pts = sorted({math.atan((b - center) / scale) for b in breakpoints})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *rest = integrate.quad(
            g, -math.pi / 2, math.pi / 2, epsabs=tol, epsrel=1e-13, limit=limit,
            points=pts or None, full_output=1,
        )
    ier = 0 if not rest else rest[0]
    ok = math.isfinite(val) and (ier == 0 or err <= 10 * tol * max(1.0, abs(val)))
    msg = "" if ok else (rest[1] if len(rest) > 1 else "quadrature failed")
    return QuadResult(val if ok else math.inf, err, ok, msg)


@dataclass(frozen=True)
class Scalar1DFamily:
    """One-parameter lambda-family on the real line: ``q(x) ~ exp(c_lam(theta, T(x)))``.

    ``center``/``scale`` only steer the quadrature substitution; ``breakpoints``
    lists known support edges or kinks.
    """

    lam: float
    statistic: Callable[[np.ndarray], np.ndarray]
    theta: float
    center: float = 0.0
    scale: float = 1.0
    breakpoints: tuple = field(default=())

    def log_unnormalized(self, x):
        s = self.theta * np.asarray(self.statistic(np.asarray(x, dtype=float)), dtype=float)
        return coupling_from_inner(self.lam, s)

    def unnormalized(self, x):
        return np.exp(self.log_unnormalized(x))

    def in_support(self, x):
        s = self.theta * np.asarray(self.statistic(np.asarray(x, dtype=float)), dtype=float)
        return np.ones_like(s, dtype=bool) if self.lam == 0 else (1.0 + self.lam * s > 0)


@dataclass(frozen=True)
class Density1D:
    """Normalized density ``exp(log_unnormalized(x) - log_norm)``."""

    log_unnormalized: Callable
    log_norm: float
    center: float = 0.0
    scale: float = 1.0
    breakpoints: tuple = ()

    def logpdf(self, x):
        return np.asarray(self.log_unnormalized(x), dtype=float) - self.log_norm

    def __call__(self, x):
        out = np.exp(self.logpdf(x))
        return float(out) if out.ndim == 0 else out

    def integrate(self, tol: float = DEFAULT_QUAD_TOL) -> QuadResult:
        return integrate_line(self, center=self.center, scale=self.scale, tol=tol, breakpoints=self.breakpoints)


def _log_integral(logf, center, scale, tol, breakpoints):
    # factor out the value at the centre so the quadrature sees O(1) numbers
    ref = float(logf(center))
    if not math.isfinite(ref):
        ref = 0.0
    res = integrate_line(lambda x: math.exp(float(logf(x)) - ref), center=center, scale=scale,
                         tol=tol, breakpoints=breakpoints)
    if not res.ok or res.value <= 0:
        return math.inf, res
    return ref + math.log(res.value), res


def log_partition_1d(family: Scalar1DFamily, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """``log int exp(c_lam(theta, T(x))) dx``; ``inf`` (with a warning) when divergent."""
    val, res = _log_integral(family.log_unnormalized, family.center, family.scale, quad_tol, family.breakpoints)
    if not math.isfinite(val):
        warnings.warn(f"log-partition integral diverges: {res.message}", DivergentIntegralWarning, stacklevel=2)
    return val


def density_1d(family: Scalar1DFamily, quad_tol: float = DEFAULT_QUAD_TOL) -> Density1D:
    logz = log_partition_1d(family, quad_tol)
    if not math.isfinite(logz):
        raise ValueError("family is not normalizable")
    return Density1D(family.log_unnormalized, logz, family.center, family.scale, family.breakpoints)


def escort_density_1d(family: Scalar1DFamily, alpha: float, quad_tol: float = DEFAULT_QUAD_TOL) -> Density1D:
    """Escort ``q^alpha / int q^alpha`` of a normalizable family member.

    Raises:
        ValueError: if ``alpha <= 0`` or ``q^alpha`` is not integrable.
    """
    if alpha <= 0:
        raise ValueError(f"escort exponent must be positive, got {alpha}")
    base = density_1d(family, quad_tol)

    def log_pow(x):
        return alpha * np.asarray(family.log_unnormalized(x), dtype=float)

    lognorm, res = _log_integral(log_pow, family.center, family.scale, quad_tol, family.breakpoints)
    if not math.isfinite(lognorm):
        raise ValueError(f"q^alpha is not integrable for alpha={alpha}: {res.message}")
    if alpha == 1:
        return base
    return Density1D(log_pow, lognorm, family.center, family.scale, family.breakpoints)
