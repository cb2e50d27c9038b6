import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from scipy import stats

from lamfam import student as st
from lamfam.numerics import SeededRng, spd_with_condition


def make(nu, d, seed=0, kappa=10.0):
    g = SeededRng(seed).child(d).generator()
    return st.StudentParams(nu, g.uniform(-1, 1, d), spd_with_condition(d, kappa, g))


@pytest.mark.parametrize("nu, d", [(1.0, 1), (3.0, 2), (10.0, 20)])
def test_family_constants(nu, d):
    assert st.family_lambda(nu, d) == pytest.approx(-2.0 / (nu + d))
    assert st.family_alpha(nu, d) == pytest.approx(1.0 + 2.0 / (nu + d))


def test_gaussian_branch_constants():
    assert st.family_lambda(math.inf, 3) == 0.0
    assert st.family_alpha(math.inf, 3) == 1.0
    p = st.StudentParams.gaussian([0.0], [[1.0]])
    assert p.is_gaussian and p.lam == 0.0


@pytest.mark.parametrize("nu", [0.0, -1.0, "abc"])
def test_invalid_degrees_of_freedom(nu):
    with pytest.raises(ValueError):
        st.StudentParams(nu, [0.0], [[1.0]])


def test_string_infinity_selects_gaussian():
    assert st.StudentParams("inf", [0.0], [[1.0]]).is_gaussian


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        st.StudentParams(3.0, [0.0, 1.0], [[1.0]])


def test_natural_parameters_reference_value():
    theta = st.natural_from_params(st.StudentParams(3.0, [0.0], [[1.0]]))
    assert theta.theta2[0, 0] == pytest.approx(-2.0 / 3.0, abs=1e-15)
    assert theta.theta1[0] == 0.0
    assert theta.lam == pytest.approx(-0.5)


def test_cauchy_log_density_at_mode():
    p = st.StudentParams(1.0, [0.0], [[1.0]])
    assert st.log_density(p, np.array([0.0])) == pytest.approx(math.log(1.0 / math.pi), abs=1e-15)


@pytest.mark.parametrize("nu", [1.0, 3.0, 10.0, math.inf])
@pytest.mark.parametrize("d", [1, 3])
def test_log_density_matches_scipy(nu, d):
    p = make(nu, d)
    x = SeededRng(1).generator().standard_normal((7, d)) * 2
    ref = (stats.multivariate_normal(p.mu, p.sigma.matrix) if math.isinf(nu)
           else stats.multivariate_t(p.mu, p.sigma.matrix, df=nu)).logpdf(x)
    np.testing.assert_allclose(st.log_density(p, x), ref, rtol=1e-12, atol=1e-12)


def test_theta2_must_be_negative_definite():
    with pytest.raises(st.DomainError):
        st.NaturalParams([0.0], [[1.0]], -0.5)


def test_params_from_natural_rejects_outside_domain():
    theta = st.NaturalParams([10.0], [[-0.5]], st.family_lambda(1.0, 1))
    assert theta.domain_value(1.0) < 0
    with pytest.raises(st.DomainError):
        st.params_from_natural(theta, 1.0)
    with pytest.raises(st.DomainError):
        st.log_partition(theta, 1.0)


def test_lambda_mismatch_is_rejected():
    theta = st.natural_from_params(make(3.0, 2))
    with pytest.raises(ValueError):
        st.log_partition(theta, 10.0)


def test_gaussian_has_no_natural_chart():
    with pytest.raises(ValueError):
        st.natural_from_params(st.StudentParams.gaussian([0.0], [[1.0]]))


@settings(max_examples=60, deadline=None)
@given(hst.integers(1, 6), hst.floats(0.5, 50.0), hst.integers(0, 10**6))
def test_natural_round_trip(d, nu, seed):
    p = make(nu, d, seed)
    back = st.params_from_natural(st.natural_from_params(p), nu)
    np.testing.assert_allclose(back.mu, p.mu, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(back.sigma.matrix, p.sigma.matrix, rtol=1e-10, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(hst.integers(1, 6), hst.floats(0.5, 50.0), hst.integers(0, 10**6))
def test_escort_moment_round_trip(d, nu, seed):
    p = make(nu, d, seed)
    back = st.params_from_escort_moments(nu, st.escort_moments(p))
    np.testing.assert_allclose(back.mu, p.mu, atol=1e-12)
    np.testing.assert_allclose(back.sigma.matrix, p.sigma.matrix, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("nu, d", [(1.0, 1), (3.0, 5), (10.0, 2)])
def test_escort_parameters(nu, d):
    p = make(nu, d)
    e = st.escort(p)
    a = p.alpha
    assert e.nu == pytest.approx(a * (nu + d) - d)
    assert e.nu == pytest.approx(nu + 2.0)
    np.testing.assert_allclose(e.sigma.matrix, nu / e.nu * p.sigma.matrix, rtol=1e-13)
    np.testing.assert_array_equal(e.mu, p.mu)


def test_within_family_escort_covariance_is_scale():
    p = make(3.0, 4)
    np.testing.assert_allclose(st.covariance(st.escort(p)), p.sigma.matrix, rtol=1e-12)


def test_gaussian_escort_power():
    p = st.StudentParams.gaussian([1.0], [[4.0]])
    assert st.escort_power(p, 2.0).sigma.matrix[0, 0] == pytest.approx(2.0)
    assert st.escort(p) is p


@pytest.mark.parametrize("nu_t, nu_q, d, ok", [(1, 1, 1, True), (1, 3, 1, False), (1, 3, 5, True),
                                               (1, 10, 5, False), (1, math.inf, 20, False), (3, math.inf, 20, True)])
def test_compatibility(nu_t, nu_q, d, ok):
    assert st.is_compatible(nu_t, nu_q, d) is ok
    p = make(nu_t, d)
    if ok:
        st.escort_moments(p, nu_q)
    else:
        with pytest.raises(st.IncompatibleError):
            st.escort_moments(p, nu_q)


def test_compatibility_value_formula():
    assert st.compatibility_value(1.0, 3.0, 1) == pytest.approx(1.0 + 2.0 * 2.0 / 4.0)
    assert st.compatibility_value(3.0, math.inf, 2) == 3.0


def test_covariance_undefined_for_heavy_tails():
    with pytest.raises(st.IncompatibleError):
        st.covariance(make(2.0, 1))


def test_shannon_entropy_matches_scipy():
    p = make(3.0, 3)
    ref = stats.multivariate_t(p.mu, p.sigma.matrix, df=3.0).entropy()
    assert st.renyi_entropy(p, 1.0) == pytest.approx(ref, abs=1e-10)
    g = p.with_nu(math.inf)
    assert st.renyi_entropy(g, 1.0) == pytest.approx(stats.multivariate_normal(g.mu, g.sigma.matrix).entropy(), abs=1e-12)


def test_renyi_entropy_continuous_in_alpha():
    p = make(3.0, 2)
    assert st.renyi_entropy(p, 1.0 + 1e-7) == pytest.approx(st.renyi_entropy(p, 1.0), abs=1e-5)
    g = p.with_nu(math.inf)
    assert st.renyi_entropy(g, 1.0 + 1e-7) == pytest.approx(st.renyi_entropy(g, 1.0), abs=1e-5)


def test_renyi_entropy_divergent_power():
    with pytest.raises(ValueError):
        st.renyi_entropy(make(1.0, 1), 0.4)


def test_entropy_function_depends_on_scale_through_logdet():
    p = make(3.0, 3)
    q = st.StudentParams(3.0, p.mu + 1.0, p.sigma.scaled(4.0))
    assert st.entropy_function(q) - st.entropy_function(p) == pytest.approx(-0.5 * 3 * math.log(4.0), abs=1e-12)


@pytest.mark.parametrize("nu", [1.0, 3.0, math.inf])
def test_gradient_batch_matches_pointwise(nu):
    p = make(nu, 3)
    x = SeededRng(5).generator().standard_normal((4, 3))
    batch = st.grad_log_density(p, x)
    for i in range(4):
        np.testing.assert_allclose(batch[i], st.grad_log_density(p, x[i]), rtol=1e-13)


def test_sample_shape_and_reproducibility():
    p = make(3.0, 2)
    a = st.sample(p, 10, SeededRng(0))
    b = st.sample(p, 10, SeededRng(0))
    assert a.shape == (10, 2)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        st.sample(p, 0, 0)


def test_sample_moments():
    p = make(10.0, 2)
    x = st.sample(p, 200_000, SeededRng(9))
    np.testing.assert_allclose(x.mean(axis=0), p.mu, atol=0.02)
    np.testing.assert_allclose(np.cov(x.T), st.covariance(p), rtol=0.05, atol=0.05)


def test_sufficient_moments_helpers():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    m = st.SufficientMoments.from_samples(x)
    np.testing.assert_allclose(m.m1, [2.0, 3.0])
    np.testing.assert_allclose(m.centered(), np.cov(x.T, bias=True))
    w = st.SufficientMoments.from_samples(x, weights=[3.0, 1.0])
    np.testing.assert_allclose(w.m1, [1.5, 2.5])
    pt = st.SufficientMoments.of_point([1.0, 2.0])
    assert pt.distance(pt) == 0.0
    mix = pt.combine(m, 0.5, 0.5)
    np.testing.assert_allclose(mix.m1, [1.5, 2.5])
    assert pt.as_vector().shape == (6,)
