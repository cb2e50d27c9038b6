"""Variational inference and maximum likelihood by escort-moment matching.

Every solver works in the space of sufficient moments ``(E[x], E[x x^T])``:
an iterate is the Student law whose escort has the current moments, and the
proximal steps are convex combinations of moments.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.special import logsumexp

from .divergences import renyi_divergence_closed
from .numerics import NotPositiveDefiniteError, SeededRng, SpdMatrix, as_generator, cholesky
from .samplers import TargetOracle, default_step, init_state, mala_chain, uniform_start
from .student import (
    IncompatibleError,
    StudentParams,
    SufficientMoments,
    compatibility_value,
    entropy_function,
    escort,
    family_alpha,
    is_compatible,
    log_density,
    params_from_escort_moments,
    sample,
)

log = logging.getLogger(__name__)

__all__ = [
    "ProxSchedule",
    "MixtureModel",
    "VIIterate",
    "ReplicateAborted",
    "prox_vi_update",
    "prox_mle_update",
    "vi_exact_escort",
    "vi_plain_mala",
    "vi_scaled_mala",
    "mle_moment_match",
    "mle_online",
    "em_init",
    "em_responsibilities",
    "em_step",
    "em_run",
    "log_likelihood",
]


class ReplicateAborted(RuntimeError):
    """A solver run stopped early; ``reason`` is a short machine-readable code."""

    def __init__(self, reason: str, iteration: int, detail: str = ""):
        self.reason = reason
        self.iteration = iteration
        super().__init__(f"{reason} at iteration {iteration}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class ProxSchedule:
    """Step sizes ``tau_k`` of the proximal iterations, ``k = 0, 1, ...``.

    ``harmonic`` uses ``tau_k = 1/k``, whose update weight ``tau/(1+tau)`` is
    ``1/(k+1)``; ``tau_0 = inf`` replaces the initial moments outright.
    """

    rule: str = "harmonic"
    tau: float | None = None

    def __post_init__(self):
        if self.rule not in ("constant", "harmonic"):
            raise ValueError(f"unknown schedule rule {self.rule!r}")
        if self.rule == "constant" and not (self.tau is not None and self.tau > 0):
            raise ValueError("constant schedule needs tau > 0")

    @classmethod
    def constant(cls, tau: float) -> ProxSchedule:
        return cls("constant", tau)

    @classmethod
    def harmonic(cls) -> ProxSchedule:
        return cls("harmonic")

    def __call__(self, k: int) -> float:
        if k < 0:
            raise ValueError("iteration index must be non-negative")
        if self.rule == "constant":
            return float(self.tau)
        return math.inf if k == 0 else 1.0 / k


def _weight(tau: float) -> float:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return 1.0 if math.isinf(tau) else tau / (1.0 + tau)


def prox_vi_update(current: SufficientMoments, target: SufficientMoments, tau: float) -> SufficientMoments:
    """``tau/(1+tau) * target + 1/(1+tau) * current``."""
    w = _weight(tau)
    if w == 1.0:
        return target
    return current.combine(target, 1.0 - w, w)


def prox_mle_update(current: SufficientMoments, data_stat: SufficientMoments, tau: float, N: int) -> SufficientMoments:
    """``N tau/(1+N tau) * data_stat + 1/(1+N tau) * current``; ``data_stat`` is a sample mean of ``T``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    w = _weight(N * tau)
    if w == 1.0:
        return data_stat
    return current.combine(data_stat, 1.0 - w, w)


@dataclass(frozen=True, eq=False)
class VIIterate:
    """State after one VI iteration; ``divergence`` is ``RD_alpha(pi, q_k)`` when known."""

    params: StudentParams | None
    cumulative_moments: SufficientMoments
    samples_used: int
    divergence: float = math.nan
    acceptance: float = math.nan
    note: str = ""


def _iteration_rng(rng, k: int) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.child(k).generator()
    return as_generator(rng)


def _init_iterate(d: int, family_nu: float, rng, target: StudentParams | None) -> VIIterate:
    x0 = uniform_start(d, rng)
    params = StudentParams(family_nu, x0, SpdMatrix.identity(d))
    moments = SufficientMoments(x0, np.eye(d) + np.outer(x0, x0))
    return VIIterate(params, moments, 0, _divergence(target, params))


def _divergence(target: StudentParams | None, q: StudentParams | None) -> float:
    if target is None or q is None:
        return math.nan
    return renyi_divergence_closed(target, q).value


def _check_compatible(target: StudentParams, family_nu: float):
    if not is_compatible(target.nu, family_nu, target.d):
        raise IncompatibleError(
            f"nu_pi + 2(nu_pi + d)/(nu + d) = {compatibility_value(target.nu, family_nu, target.d):.6g} <= 2"
        )


def _moments_to_params(family_nu, moments, k):
    try:
        return params_from_escort_moments(family_nu, moments), ""
    except NotPositiveDefiniteError as exc:
        return None, f"iteration {k}: {exc}"


def vi_exact_escort(target: StudentParams, family_nu: float, n_per_iter: int | None = None, n_iters: int = 100,
                    rng=None) -> list[VIIterate]:
    """Moment matching with exact draws from the target's escort.

    Returns ``n_iters + 1`` iterates, the first being the initialization
    ``(x0, I)`` with ``x0`` uniform on ``[-5, 5]^d``.  Iterate ``k`` matches
    the running means of ``(x, x x^T)`` over all ``k N`` draws so far.
    """
    _check_compatible(target, family_nu)
    d = target.d
    n = 10 * d if n_per_iter is None else int(n_per_iter)
    rng = SeededRng(0) if rng is None else rng
    out = [_init_iterate(d, family_nu, _iteration_rng(rng, 0), target)]
    e = escort(target, family_nu)
    s1 = np.zeros(d)
    s2 = np.zeros((d, d))
    for k in range(n_iters):
        x = sample(e, n, _iteration_rng(rng, k + 1))
        s1 += x.sum(axis=0)
        s2 += x.T @ x
        count = (k + 1) * n
        moments = SufficientMoments(s1 / count, s2 / count)
        params, note = _moments_to_params(family_nu, moments, k + 1)
        out.append(VIIterate(params, moments, count, _divergence(target, params), note=note))
    return out


def _oracle_and_target(oracle):
    if isinstance(oracle, StudentParams):
        return TargetOracle.from_student(oracle), oracle
    return oracle, None


def vi_plain_mala(oracle: TargetOracle | StudentParams, family_nu: float, n_per_iter: int | None = None,
                  n_iters: int = 100, rng=None, *, target: StudentParams | None = None) -> list[VIIterate]:
    """Moment matching with escort moments estimated by an isotropic MALA chain.

    ``oracle`` may be a :class:`StudentParams`, which also enables divergence
    tracking; otherwise pass ``target`` for that purpose.  The chain carries
    over between iterations and the moments average every sample drawn so far.
    """
    oracle, tgt = _oracle_and_target(oracle)
    target = target or tgt
    if target is not None:
        _check_compatible(target, family_nu)
    d = oracle.d
    n = 10 * d if n_per_iter is None else int(n_per_iter)
    rng = SeededRng(0) if rng is None else rng
    alpha = family_alpha(family_nu, d)
    first = _init_iterate(d, family_nu, _iteration_rng(rng, 0), target)
    out = [first]
    state = init_state(oracle, first.params.mu, alpha, default_step(d))
    s1 = np.zeros(d)
    s2 = np.zeros((d, d))
    for k in range(n_iters):
        res = mala_chain(oracle, alpha, n, rng=_iteration_rng(rng, k + 1), state=state)
        state = res.state
        s1 += res.samples.sum(axis=0)
        s2 += res.samples.T @ res.samples
        count = (k + 1) * n
        moments = SufficientMoments(s1 / count, s2 / count)
        params, note = _moments_to_params(family_nu, moments, k + 1)
        out.append(VIIterate(params, moments, count, _divergence(target, params), res.acceptance_rate, note))
    return out


def vi_scaled_mala(oracle: TargetOracle | StudentParams, family_nu: float, n_per_iter: int | None = None,
                   n_iters: int = 100, rng=None, *, target: StudentParams | None = None,
                   schedule: ProxSchedule | None = None) -> list[VIIterate]:
    """Proximal VI with MALA preconditioned by the current scale ``Sigma_k``.

    Iteration ``k`` runs ``N`` steps with ``A = Sigma_k``, estimates the escort
    moments from those ``N`` samples and mixes them into the current moments
    with weight ``tau_k/(1+tau_k)`` (``1/(k+1)`` for the harmonic schedule).

    Raises:
        ReplicateAborted: when the updated scale is not positive definite.
    """
    oracle, tgt = _oracle_and_target(oracle)
    target = target or tgt
    if target is not None:
        _check_compatible(target, family_nu)
    d = oracle.d
    n = 10 * d if n_per_iter is None else int(n_per_iter)
    rng = SeededRng(0) if rng is None else rng
    schedule = schedule or ProxSchedule.harmonic()
    alpha = family_alpha(family_nu, d)
    first = _init_iterate(d, family_nu, _iteration_rng(rng, 0), target)
    out = [first]
    params, moments = first.params, first.cumulative_moments
    state = init_state(oracle, params.mu, alpha, default_step(d), params.sigma)
    for k in range(n_iters):
        res = mala_chain(oracle, alpha, n, rng=_iteration_rng(rng, k + 1), state=state, scale=params.sigma)
        state = res.state
        estimate = SufficientMoments.from_samples(res.samples)
        moments = prox_vi_update(moments, estimate, schedule(k))
        try:
            params = params_from_escort_moments(family_nu, moments)
        except NotPositiveDefiniteError as exc:
            raise ReplicateAborted("non_pd_scale", k + 1, str(exc)) from exc
        out.append(VIIterate(params, moments, (k + 1) * n, _divergence(target, params), res.acceptance_rate))
    return out


def _as_data(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("data must be an (N, d) array")
    return x


def mle_moment_match(data, nu: float) -> tuple[StudentParams, float]:
    """Relaxed MLE: match escort moments to the data means.

    Returns the fitted law and ``psi_lam`` at its parameters, a lower bound on
    the mean log-likelihood of the data for finite ``nu``.
    """
    x = _as_data(data)
    if x.shape[0] < x.shape[1] + 1:
        raise ValueError(f"need at least d + 1 = {x.shape[1] + 1} points, got {x.shape[0]}")
    params = params_from_escort_moments(nu, SufficientMoments.from_samples(x))
    return params, entropy_function(params)


def mle_online(stream: Iterable, nu: float, n_steps: int | None = None, init: StudentParams | None = None,
               *, record_every: int = 1) -> list[StudentParams]:
    """Online relaxed MLE with harmonic weights (one data point per step).

    After ``k`` points the escort moments of the iterate equal the running
    means of ``(x, x x^T)``.  While the running covariance is still singular
    the previous scale is kept.  Returns the initialization followed by
    every ``record_every``-th iterate (the last one is always included).
    """
    it = iter(stream)
    first = None
    if init is None:
        first = np.atleast_1d(np.asarray(next(it), dtype=float))
        d = first.size
        init = StudentParams(nu, np.zeros(d), SpdMatrix.identity(d))
    d = init.d
    out = [init]
    mu = init.mu.copy()
    M2 = init.sigma.matrix + np.outer(mu, mu)
    sigma = init.sigma
    k = 0

    def points():
        if first is not None:
            yield first
        yield from it

    # the running covariance only gains PSD rank-one terms, so once it is
    # positive definite it stays so and needs factoring only when recorded
    pd_reached = False
    last = init
    for x in points():
        if n_steps is not None and k >= n_steps:
            break
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = 1.0 / (k + 1)
        mu = w * x + (1.0 - w) * mu
        M2 = w * np.outer(x, x) + (1.0 - w) * M2
        k += 1
        record = k % record_every == 0
        if record or not pd_reached:
            S = M2 - np.outer(mu, mu)
            try:
                sigma = cholesky(0.5 * (S + S.T))
                pd_reached = True
            except NotPositiveDefiniteError:
                pass
        if record:
            last = StudentParams(nu, mu, sigma)
            out.append(last)
    if k % record_every:
        S = M2 - np.outer(mu, mu)
        try:
            sigma = cholesky(0.5 * (S + S.T))
        except NotPositiveDefiniteError:
            pass
        out.append(StudentParams(nu, mu, sigma))
    return out


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Weights ``xi_j`` and Student components sharing ``(nu, d)``."""

    weights: np.ndarray
    components: tuple[StudentParams, ...]
    frozen: tuple[int, ...] = field(default=())

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        comps = tuple(self.components)
        if w.ndim != 1 or w.size != len(comps) or not comps:
            raise ValueError("need one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1.0) >= 1e-12:
            raise ValueError(f"weights must be non-negative and sum to 1, got sum {w.sum()!r}")
        nu, d = comps[0].nu, comps[0].d
        if any(c.nu != nu or c.d != d for c in comps):
            raise ValueError("components must share degrees of freedom and dimension")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def J(self) -> int:
        return len(self.components)

    @property
    def nu(self) -> float:
        return self.components[0].nu

    @property
    def d(self) -> int:
        return self.components[0].d

    def component_log_densities(self, data) -> np.ndarray:
        x = _as_data(data)
        return np.column_stack([log_density(c, x) for c in self.components])

    def sample(self, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
        """``n`` draws and their component labels."""
        gen = as_generator(rng)
        labels = gen.choice(self.J, size=n, p=self.weights)
        x = np.empty((n, self.d))
        for j, c in enumerate(self.components):
            idx = np.flatnonzero(labels == j)
            if idx.size:
                x[idx] = sample(c, idx.size, gen)
        return x, labels


def _normalize_weights(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    w = w / w.sum()
    # push the residual rounding onto the largest weight so the sum is 1 to the last bit
    w[np.argmax(w)] += 1.0 - w.sum()
    return w


def em_init(J: int, d: int, nu: float, rng) -> MixtureModel:
    """Uniform weights, means from ``N(0, 10 I)``, scales ``10 I``."""
    gen = as_generator(rng)
    comps = tuple(StudentParams(nu, math.sqrt(10.0) * gen.standard_normal(d), cholesky(10.0 * np.eye(d)))
                  for _ in range(J))
    return MixtureModel(_normalize_weights(np.full(J, 1.0 / J)), comps)


def em_responsibilities(model: MixtureModel, data) -> np.ndarray:
    """Posterior component probabilities, an ``(N, J)`` matrix with unit row sums."""
    with np.errstate(divide="ignore"):
        logw = np.log(model.weights)
    lg = model.component_log_densities(data) + logw
    norm = logsumexp(lg, axis=1, keepdims=True)
    bad = ~np.isfinite(norm[:, 0])
    gamma = np.exp(lg - np.where(bad[:, None], 0.0, norm))
    if bad.any():
        log.warning("%d points underflow in every component; using uniform responsibilities", int(bad.sum()))
        gamma[bad] = 1.0 / model.J
    return gamma / gamma.sum(axis=1, keepdims=True)


def em_step(model: MixtureModel, data) -> MixtureModel:
    """One relaxed EM step: weighted escort-moment matching per component.

    A component with vanishing total responsibility keeps its parameters.  A
    non-positive-definite scale is jittered once by ``1e-8 * trace / d``;
    if it is still not positive definite :class:`NotPositiveDefiniteError` is
    raised (a component collapsed onto too few points).
    """
    x = _as_data(data)
    N, d = x.shape
    gamma = em_responsibilities(model, x)
    totals = gamma.sum(axis=0)
    xi = _normalize_weights(totals / N)
    comps = []
    frozen = []
    for j, c in enumerate(model.components):
        if totals[j] <= 1e-12 * N:
            log.warning("component %d has no responsibility mass; frozen", j)
            comps.append(c)
            frozen.append(j)
            continue
        w = gamma[:, j] / totals[j]
        mu = w @ x
        S = (x * w[:, None]).T @ x - np.outer(mu, mu)
        S = 0.5 * (S + S.T)
        try:
            sigma = cholesky(S)
        except NotPositiveDefiniteError:
            jitter = 1e-8 * float(np.trace(S)) / d
            log.warning("component %d scale not positive definite; adding jitter %.3g", j, jitter)
            try:
                sigma = cholesky(S + jitter * np.eye(d))
            except NotPositiveDefiniteError as exc:
                raise NotPositiveDefiniteError(
                    exc.pivot, f"component {j} after jitter {jitter:.3g} "
                    f"(trace {np.trace(S):.3g}, total responsibility {totals[j]:.3g})") from exc
        comps.append(StudentParams(c.nu, mu, sigma))
    return MixtureModel(xi, tuple(comps), tuple(frozen))


def em_run(model: MixtureModel, data, n_steps: int) -> tuple[list[MixtureModel], np.ndarray]:
    """``n_steps`` EM steps; returns all models and their data log-likelihoods.

    Raises:
        ReplicateAborted: ``"component_collapse"`` when a step leaves a
            component scale that is not positive definite even after jitter.
    """
    models = [model]
    lls = [log_likelihood(model, data)]
    for k in range(n_steps):
        try:
            model = em_step(model, data)
        except NotPositiveDefiniteError as exc:
            raise ReplicateAborted("component_collapse", k + 1, str(exc)) from exc
        models.append(model)
        lls.append(log_likelihood(model, data))
    return models, np.asarray(lls)


def log_likelihood(model: MixtureModel | StudentParams, data) -> float:
    """Sum of log-densities over the data points."""
    x = _as_data(data)
    if isinstance(model, StudentParams):
        return float(np.sum(log_density(model, x)))
    with np.errstate(divide="ignore"):
        logw = np.log(model.weights)
    return float(np.sum(logsumexp(model.component_log_densities(x) + logw, axis=1)))
