import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from scipy import special

from lamfam.numerics import (
    NotPositiveDefiniteError,
    SeededRng,
    SpdMatrix,
    as_generator,
    cholesky,
    log_gamma,
    spd_with_condition,
)


@pytest.mark.parametrize("x, expected", [(1.0, 0.0), (2.0, 0.0), (0.5, 0.5 * math.log(math.pi)), (5.0, math.log(24.0))])
def test_log_gamma_known_values(x, expected):
    assert log_gamma(x) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, float("nan")])
def test_log_gamma_rejects_non_positive(x):
    with pytest.raises(ValueError):
        log_gamma(x)


def test_log_gamma_vectorized():
    xs = np.array([0.3, 1.7, 40.0])
    np.testing.assert_allclose(log_gamma(xs), special.gammaln(xs), rtol=0, atol=1e-13)


def test_cholesky_indefinite_reports_pivot():
    with pytest.raises(NotPositiveDefiniteError) as info:
        cholesky([[1.0, 2.0], [2.0, 1.0]])
    assert info.value.pivot == 1


@pytest.mark.parametrize("M", [[[1.0, 0.5], [0.0, 1.0]], [[1.0, 2.0, 3.0]], [[np.nan]]])
def test_cholesky_rejects_malformed(M):
    with pytest.raises(ValueError):
        cholesky(M)


def test_spd_operations_match_dense_linear_algebra(rng):
    A = rng.standard_normal((4, 4))
    M = A @ A.T + 4 * np.eye(4)
    S = cholesky(M)
    b = rng.standard_normal(4)
    np.testing.assert_allclose(S.matrix, M, atol=1e-12)
    np.testing.assert_allclose(S.solve(b), np.linalg.solve(M, b), rtol=1e-12)
    np.testing.assert_allclose(S.inverse, np.linalg.inv(M), rtol=1e-11, atol=1e-14)
    assert S.logdet == pytest.approx(np.linalg.slogdet(M)[1], abs=1e-12)
    assert S.quad_form(b) == pytest.approx(b @ np.linalg.solve(M, b), rel=1e-12)
    batch = rng.standard_normal((5, 4))
    np.testing.assert_allclose(S.quad_form(batch), np.einsum("ni,ij,nj->n", batch, np.linalg.inv(M), batch), rtol=1e-11)
    w = S.whiten(b)
    assert float(w @ w) == pytest.approx(S.quad_form(b), rel=1e-12)
    assert S.scaled(3.0).logdet == pytest.approx(S.logdet + 4 * math.log(3.0), abs=1e-12)


def test_identity():
    I3 = SpdMatrix.identity(3)
    np.testing.assert_array_equal(I3.matrix, np.eye(3))
    assert I3.logdet == 0.0


@pytest.mark.parametrize("d, kappa", [(1, 10.0), (2, 10.0), (5, 1000.0), (20, 10.0)])
def test_spd_with_condition_spectrum(d, kappa):
    S = spd_with_condition(d, kappa, SeededRng(3).generator())
    ev = np.linalg.eigvalsh(S.matrix)
    if d == 1:
        assert ev[0] == pytest.approx(1.0)
    else:
        np.testing.assert_allclose(ev, np.geomspace(1.0, kappa, d), rtol=1e-10)


def test_spd_with_condition_rejects_bad_input():
    with pytest.raises(ValueError):
        spd_with_condition(0, 10, 0)
    with pytest.raises(ValueError):
        spd_with_condition(3, 0.5, 0)


def test_seeded_rng_reproducible_and_independent():
    a = SeededRng(42).child(1, 2).generator().standard_normal(5)
    b = SeededRng(42).child(1, 2).generator().standard_normal(5)
    c = SeededRng(42).child(1, 3).generator().standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    # a child differs from its parent with the same trailing ids
    assert not np.array_equal(SeededRng(42).child(1).generator().standard_normal(3),
                              SeededRng(42).child(1, 0).generator().standard_normal(3))


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_seeded_rng_range(seed):
    with pytest.raises(ValueError):
        SeededRng(seed)


def test_as_generator_variants():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert isinstance(as_generator(SeededRng(1)), np.random.Generator)
    assert isinstance(as_generator(5), np.random.Generator)
    with pytest.raises(TypeError):
        as_generator("seed")


@settings(max_examples=50, deadline=None)
@given(hst.integers(1, 6), hst.floats(1.0, 1e4), hst.integers(0, 2**32))
def test_solve_inverts_matrix_product(d, kappa, seed):
    g = np.random.default_rng(seed)
    S = spd_with_condition(d, kappa, g)
    b = g.standard_normal(d)
    np.testing.assert_allclose(S.matrix @ S.solve(b), b, atol=1e-9 * kappa)
