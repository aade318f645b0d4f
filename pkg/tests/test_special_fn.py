import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from charpoly_wishart.errors import AiryRangeError, ConditioningError
from charpoly_wishart.special_fn import (AIRY_DIAG_SWITCH, SINC_SWITCH, airy, airy_kernel, airy_pair,
                                         airy_prime, airy_quadrature, cauchy_det_check, kernel_matrix,
                                         s2_elementary, sine_kernel, vandermonde)


def test_sine_kernel_examples():
    assert sine_kernel(0.3, 0.3) == 1.0
    assert sine_kernel(0.5, 0.0) == pytest.approx(2 / math.pi, rel=1e-15)
    assert sine_kernel(1.0, 0.0) == pytest.approx(0.0, abs=1e-16)


def test_sine_kernel_switch_continuity():
    for d in (SINC_SWITCH, -SINC_SWITCH):
        t = math.pi * d
        direct = math.sin(t) / t
        assert abs(sine_kernel(d * (1 - 1e-12), 0.0) - direct) < 1e-12
        assert abs(sine_kernel(d, 0.0) - direct) < 1e-12


def test_airy_origin_values():
    assert airy(0.0) == pytest.approx(0.3550280538878172, abs=1e-15)
    assert airy_prime(0.0) == pytest.approx(-0.2588194037928068, abs=1e-15)
    assert airy(0.0) == pytest.approx(3 ** (-2 / 3) / math.gamma(2 / 3), abs=1e-15)
    assert airy_prime(0.0) == pytest.approx(-(3 ** (-1 / 3)) / math.gamma(1 / 3), abs=1e-15)


def test_airy_against_mpmath_on_supported_range():
    xs = np.concatenate([np.linspace(-20, 10, 241), [-8.0, -7.999, 8.0, 8.001, -4.5, 4.5]])
    for x in xs:
        a, b = airy_pair(float(x))
        assert abs(a - oracles.ai(x)) < 1e-10, x
        assert abs(b - oracles.aip(x)) < 1e-10, x


def test_airy_range_error():
    for x in (-20.5, 10.5, math.nan):
        with pytest.raises(AiryRangeError):
            airy(x)


def test_airy_ode_residual():
    h = 1e-3
    for x in np.concatenate([[-5.0, 0.0, 2.0], np.linspace(-10, 5, 61)]):
        f = [airy(x + k * h) for k in (-2, -1, 0, 1, 2)]
        second = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
        assert abs(second - x * f[2]) < 1e-6, x


def test_airy_two_routes_agree():
    for x in np.linspace(-8, 4, 25):
        a, b = airy_pair(float(x))
        qa, qb = airy_quadrature(float(x))
        assert abs(a - qa) < 1e-8 and abs(b - qb) < 1e-8, x


def test_airy_kernel_examples():
    assert airy_kernel(0.0, 0.0) == pytest.approx(0.066987483779664, abs=1e-14)
    assert airy_kernel(0.0, 0.0) == pytest.approx(airy_prime(0.0) ** 2, abs=1e-15)
    # two routes at (1, 0); this sign convention gives a positive diagonal
    want = oracles.airy_kernel(1.0, 0.0)
    assert want == pytest.approx(0.021485503837038, abs=1e-14)
    assert airy_kernel(1.0, 0.0) == pytest.approx(want, abs=1e-14)
    (a1, b1), (a0, b0) = airy_quadrature(1.0), airy_quadrature(0.0)
    assert abs(airy_kernel(1.0, 0.0) - (a1 * b0 - b1 * a0)) < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.floats(-15, 8), st.floats(-15, 8))
def test_airy_kernel_symmetric(x, y):
    assert airy_kernel(x, y) == airy_kernel(y, x) or \
        abs(airy_kernel(x, y) - airy_kernel(y, x)) < 1e-15


def test_airy_kernel_diagonal_blend():
    for s in (-3.0, 0.0, 1.5):
        for h in (0.3 * AIRY_DIAG_SWITCH, 0.999 * AIRY_DIAG_SWITCH, 1.001 * AIRY_DIAG_SWITCH):
            assert abs(airy_kernel(s + h, s) - oracles.airy_kernel(s + h, s)) < 1e-12
        assert airy_kernel(s, s) == pytest.approx(oracles.airy_kernel(s, s), abs=1e-14)


def test_kernel_matrix():
    km = kernel_matrix("sine", [0.1, 0.4], [0.1, 0.4])
    assert np.all(np.diag(km.entries) == 1.0)
    assert km.det() == pytest.approx(1 - sine_kernel(0.1, 0.4) ** 2)
    with pytest.raises(ValueError):
        kernel_matrix("bessel", [0.0], [0.0])


def test_vandermonde_examples():
    assert vandermonde([1.0, 2.0]) == 1.0
    assert vandermonde([1.0, 2.0, 4.0]) == 6.0
    assert vandermonde([1.0, 3.0, 1.0]) == 0.0
    assert vandermonde([]) == 1.0 and vandermonde([5.0]) == 1.0
    assert vandermonde([1j, 2.0]) == pytest.approx(2.0 - 1j)


def test_vandermonde_permutation_sign():
    rng = np.random.default_rng(3)
    vals = rng.normal(size=5)
    base = vandermonde(vals)
    for perm in itertools.permutations(range(5)):
        inversions = sum(perm[i] > perm[j] for i in range(5) for j in range(i + 1, 5))
        assert vandermonde(vals[list(perm)]) == pytest.approx((-1) ** inversions * base, rel=1e-12)


def test_cauchy_examples():
    lhs, rhs = cauchy_det_check([1.0, 2.0], [3.0, 5.0])
    assert lhs == pytest.approx(-1 / 12, rel=1e-14) and rhs == pytest.approx(-1 / 12, rel=1e-14)
    assert cauchy_det_check([2.0], [1.0]) == (1.0, 1.0)
    with pytest.raises(ConditioningError):
        cauchy_det_check([1.0, 2.0], [2.0, 5.0])
    with pytest.raises(ConditioningError):
        cauchy_det_check([1.0, 1.0], [3.0, 5.0])


def test_cauchy_random_instances():
    rng = np.random.default_rng(8)
    for trial in range(100):
        k = 1 + trial % 5
        # well separated: unit gaps within each set, both sets apart
        a = 2.0 * np.arange(k) + rng.uniform(0, 1, k)
        b = -2.0 * np.arange(k) - rng.uniform(0, 1, k) - 1.0
        lhs, rhs = cauchy_det_check(a, b)
        assert abs(lhs - rhs) / abs(rhs) < 1e-10
        dense = oracles.dense_det(1.0 / (a[:, None] - b[None, :])).real
        assert abs(lhs - dense) / abs(dense) < 1e-10


def test_s2_examples():
    assert s2_elementary([3.0, -7.0], 1.25) == 1.0
    # dropping each pair leaves (3,4),(2,4),(2,3),(1,4),(1,3),(1,2): 12+8+6+4+3+2 = 35
    assert s2_elementary([1.0, 2.0, 3.0, 4.0], 0.0) == 35.0


def test_s2_against_finite_differences():
    rng = np.random.default_rng(1)
    d = rng.uniform(-1, 1, 6)
    x0 = 0.37

    def p(x):
        return np.prod(x - d)

    def half_second(h):
        return 0.5 * (p(x0 + h) - 2 * p(x0) + p(x0 - h)) / h ** 2

    # one Richardson step removes the h^2 term of the central difference
    est = (4 * half_second(1e-3) - half_second(2e-3)) / 3
    assert abs(s2_elementary(d, x0) - est) < 1e-8


def test_s2_symmetric_and_vectorized():
    rng = np.random.default_rng(2)
    d = rng.normal(size=6)
    base = s2_elementary(d, 0.5)
    for _ in range(10):
        assert s2_elementary(rng.permutation(d), 0.5) == pytest.approx(base, rel=1e-13)
    batch = np.stack([d, d[::-1]])
    assert np.allclose(s2_elementary(batch, 0.5), [base, base])
    z = s2_elementary(np.array([1 + 1j, 2.0, 3.0]), 0.0)
    assert z == pytest.approx(-(1 + 1j) - 2 - 3)
    with pytest.raises(ValueError):
        s2_elementary([1.0], 0.0)
