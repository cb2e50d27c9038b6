"""Oracle suite: closed forms against quadrature, duality identities, round trips."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import student as st
from ..divergences import renyi_divergence_closed, renyi_divergence_student_1d
from ..duality import Scalar1DFamily, coupling_from_inner, fenchel_young_residual, integrate_line, log_partition_1d
from ..inference import ProxSchedule, prox_vi_update
from ..numerics import SeededRng, spd_with_condition
from ..samplers import TargetOracle


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_residual: float
    tolerance: float
    n_cases: int

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<38} max residual {self.max_residual:.3e}  (tol {self.tolerance:.0e}, {self.n_cases} cases)"


def random_student(rng: np.random.Generator, d: int, nu: float, kappa: float = 10.0) -> st.StudentParams:
    return st.StudentParams(nu, rng.uniform(-1.0, 1.0, d), spd_with_condition(d, kappa, rng))


def divergence_cases_1d(n: int = 20, seed: int = 7) -> list[tuple[st.StudentParams, st.StudentParams]]:
    """Compatible 1-D (pi, q) Student pairs with varied location and scale."""
    g = SeededRng(seed).generator()
    nus = (1.0, 3.0, 10.0)
    out = []
    while len(out) < n:
        nu_p, nu_q = g.choice(nus), g.choice(nus)
        if not st.is_compatible(nu_p, nu_q, 1):
            continue
        pi = st.StudentParams(nu_p, [g.uniform(-2, 2)], [[g.uniform(0.3, 3.0)]])
        q = st.StudentParams(nu_q, [g.uniform(-2, 2)], [[g.uniform(0.3, 3.0)]])
        out.append((pi, q))
    return out


def check_divergence_quadrature() -> CheckResult:
    cases = divergence_cases_1d()
    res = [abs(renyi_divergence_closed(p, q).value - renyi_divergence_student_1d(p, q).value) for p, q in cases]
    return CheckResult("divergence closed form vs quadrature", max(res), 1e-6, len(cases))


def fenchel_young_cases(n: int = 100, seed: int = 11):
    g = SeededRng(seed).generator()
    dims, nus = (1, 2, 5, 20), (1.0, 3.0, 10.0)
    return [random_student(g, dims[i % 4], nus[(i // 4) % 3]) for i in range(n)]


def check_fenchel_young(phi_offset: float = 0.0) -> CheckResult:
    res = []
    cases = fenchel_young_cases()
    for p in cases:
        theta = st.natural_from_params(p)
        phi = st.log_partition(theta, p.nu) + phi_offset
        res.append(abs(fenchel_young_residual(phi, st.entropy_function(p), st.coupling(theta, st.escort_moments(p)))))
    return CheckResult("Fenchel-Young at escort moments", max(res), 1e-8, len(cases))


def check_round_trips(n: int = 100, seed: int = 13) -> CheckResult:
    g = SeededRng(seed).generator()
    res = []
    for i in range(n):
        d = int(g.integers(1, 8))
        p = random_student(g, d, float(g.uniform(0.5, 30.0)))
        back = st.params_from_natural(st.natural_from_params(p), p.nu)
        rel_mu = np.linalg.norm(back.mu - p.mu) / max(np.linalg.norm(p.mu), 1e-300)
        rel_s = np.linalg.norm(back.sigma.matrix - p.sigma.matrix) / np.linalg.norm(p.sigma.matrix)
        m = st.escort_moments(p)
        back2 = st.params_from_escort_moments(p.nu, m)
        rel_m = np.linalg.norm(back2.sigma.matrix - p.sigma.matrix) / np.linalg.norm(p.sigma.matrix)
        res.append(max(rel_mu, rel_s, rel_m))
    return CheckResult("natural/moment chart round trips", max(res), 1e-10, n)


def check_log_partition_quadrature() -> CheckResult:
    res = []
    cases = [(nu, s2) for nu in (1.0, 3.0, 10.0) for s2 in (0.5, 1.0, 4.0)]
    for nu, s2 in cases:
        p = st.StudentParams(nu, [0.0], [[s2]])
        theta = st.natural_from_params(p)
        fam = Scalar1DFamily(theta.lam, np.square, float(theta.theta2[0, 0]), 0.0, math.sqrt(s2))
        res.append(abs(log_partition_1d(fam) - st.log_partition(theta, nu)))
    return CheckResult("log-partition vs quadrature", max(res), 1e-8, len(cases))


def check_renyi_entropy_quadrature() -> CheckResult:
    res = []
    cases = [(nu, a) for nu in (1.0, 3.0, 10.0) for a in (0.8, 1.0, 1.5, 2.0)]
    for nu, a in cases:
        p = st.StudentParams(nu, [0.4], [[1.7]])
        if a * (nu + 1) <= 1:
            continue

        def logp(x):
            return st.log_density(p, np.array([x]))

        if a == 1:
            q = integrate_line(lambda x: -math.exp(logp(x)) * logp(x), center=0.4, scale=1.3)
            val = q.value
        else:
            q = integrate_line(lambda x: math.exp(a * logp(x)), center=0.4, scale=1.3)
            val = math.log(q.value) / (1 - a)
        res.append(abs(val - st.renyi_entropy(p, a)))
    return CheckResult("Renyi entropy vs quadrature", max(res), 1e-8, len(res))


def check_density_consistency(seed: int = 17) -> CheckResult:
    g = SeededRng(seed).generator()
    res = []
    for i in range(20):
        d = (1, 2, 5, 20)[i % 4]
        p = random_student(g, d, (1.0, 3.0, 10.0)[i % 3])
        theta = st.natural_from_params(p)
        x = g.standard_normal((100, d)) * 3
        inner = x @ theta.theta1 + np.einsum("ij,ni,nj->n", theta.theta2, x, x)
        lam_form = coupling_from_inner(theta.lam, inner) - st.log_partition(theta, p.nu)
        res.append(float(np.max(np.abs(lam_form - st.log_density(p, x)))))
    return CheckResult("lambda-form vs Student density", max(res), 1e-10, 20)


def check_prox_identities() -> CheckResult:
    g = SeededRng(19).generator()
    d = 3
    target = st.SufficientMoments(g.standard_normal(d), np.eye(d) * 2)
    res = []
    for sched, offset in ((ProxSchedule.constant(0.7), 0), (ProxSchedule.harmonic(), 1)):
        cur = st.SufficientMoments(g.standard_normal(d), np.eye(d) * 5)
        e0 = cur.as_vector() - target.as_vector()
        prod = 1.0
        for k in range(offset, offset + 1000):
            tau = sched(k)
            cur = prox_vi_update(cur, target, tau)
            prod /= 1.0 + tau
            err = cur.as_vector() - target.as_vector()
            res.append(float(np.max(np.abs(err - prod * e0))) / max(1.0, float(np.max(np.abs(e0)))))
    return CheckResult("prox error product formula", max(res), 1e-12, 2000)


def check_gradients(seed: int = 23) -> CheckResult:
    g = SeededRng(seed).generator()
    res = []
    for d, nu in ((1, 1.0), (2, 3.0), (5, 10.0), (5, math.inf)):
        p = random_student(g, d, nu)
        oracle = TargetOracle.from_student(p)
        for _ in range(25):
            x = p.mu + 2.0 * g.standard_normal(d)
            res.append(oracle.gradient_error(x))
    return CheckResult("target gradient vs finite differences", max(res), 1e-5, len(res))


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_divergence_quadrature,
    check_round_trips,
    check_log_partition_quadrature,
    check_renyi_entropy_quadrature,
    check_density_consistency,
    check_prox_identities,
    check_gradients,
)


def validate(phi_offset: float = 0.0) -> list[CheckResult]:
    """Run every oracle check; ``phi_offset`` perturbs the log-partition in the Fenchel-Young check."""
    out = [check_fenchel_young(phi_offset)]
    out.extend(chk() for chk in CHECKS)
    return out
