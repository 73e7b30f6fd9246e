import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eistwist.errors import DomainError, MaxEvaluations, NonFinite, PoleError
from eistwist.special import (
    SQRT_PI,
    bessel_k,
    check_finite,
    complex_gamma,
    completed_zeta,
    gamma_ratio_half,
    integrate_de,
    whittaker_w,
    zeta,
)


def mp(z):
    return complex(z)


def test_gamma_half():
    assert abs(complex_gamma(0.5) - SQRT_PI) < 1e-15


@pytest.mark.parametrize("s", [2.5 + 1j, 0.3 - 4j, -1.5 + 0.2j, 7 + 12j])
def test_gamma_matches_mpmath(s):
    ref = mp(mpmath.gamma(s))
    assert abs(complex_gamma(s) - ref) <= 1e-13 * abs(ref)


@pytest.mark.parametrize("s", [0, -1, -7])
def test_gamma_poles(s):
    with pytest.raises(PoleError):
        complex_gamma(s)


@pytest.mark.parametrize("s", [2.5, 1.7 + 3j, 40 + 80j, 0.9 - 0.2j])
def test_gamma_ratio_half(s):
    ref = mp(mpmath.gamma(s - 0.5) / mpmath.gamma(s))
    assert abs(gamma_ratio_half(s) - ref) <= 1e-12 * abs(ref)


def test_gamma_ratio_half_pole():
    with pytest.raises(PoleError):
        gamma_ratio_half(0.5)


def test_zeta_values():
    assert abs(zeta(2) - math.pi**2 / 6) < 1e-15
    assert abs(zeta(-1) + 1 / 12) < 1e-15
    with pytest.raises(PoleError):
        zeta(1)


@pytest.mark.parametrize("s", [0.3 + 2j, 2.4 - 1j, -1.5 + 0.5j])
def test_completed_zeta_symmetry(s):
    assert abs(completed_zeta(s) - completed_zeta(1 - s)) <= 1e-13 * abs(completed_zeta(s))


def test_completed_zeta_poles():
    for s in (0, 1):
        with pytest.raises(PoleError):
            completed_zeta(s)


@pytest.mark.parametrize(
    "nu,x",
    [(0.5, 1.0), (2.1, 1.03), (2.1 + 3j, 0.2), (0.0, 5.0), (1.5 - 7j, 12.0), (3.0, 60.0), (10 + 1j, 0.5)],
)
def test_bessel_k_matches_mpmath(nu, x):
    ref = mp(mpmath.besselk(nu, x))
    assert abs(bessel_k(nu, x) - ref) <= 1e-12 * abs(ref)


def test_bessel_k_half_order_closed_form():
    x = 2.3
    assert abs(bessel_k(0.5, x) - math.sqrt(math.pi / (2 * x)) * math.exp(-x)) < 1e-15


@settings(max_examples=30, deadline=None)
@given(
    st.floats(0, 4), st.floats(-6, 6), st.floats(0.05, 30)
)
def test_bessel_k_property(re, im, x):
    nu = complex(re, im)
    ref = mp(mpmath.besselk(nu, x))
    assert abs(bessel_k(nu, x) - ref) <= 1e-11 * abs(ref) + 1e-300
    assert bessel_k(-nu, x) == bessel_k(nu, x)


def test_bessel_k_vectorised():
    xs = np.array([0.5, 1.0, 2.0])
    out = bessel_k(1.2, xs)
    assert out.shape == (3,)
    assert all(abs(out[i] - bessel_k(1.2, float(x))) == 0 for i, x in enumerate(xs))


def test_bessel_k_domain():
    with pytest.raises(DomainError):
        bessel_k(1.0, 0.0)


def test_whittaker_w():
    s, n, z = 2.5, -2, 0.3 + 0.4j
    y = z.imag
    ref = 2 * math.sqrt(2 * y) * mp(mpmath.besselk(s - 0.5, 4 * math.pi * y)) * cmath.exp(-4j * math.pi * z.real)
    assert abs(whittaker_w(s, n, z) - ref) < 1e-14
    with pytest.raises(DomainError):
        whittaker_w(s, 0, z)
    with pytest.raises(DomainError):
        whittaker_w(s, 1, 0.3 - 0.1j)


def test_integrate_de_finite_and_endpoint_singularity():
    r = integrate_de(lambda x: np.sqrt(x), 0.0, 1.0, 1e-14)
    assert abs(r.value - 2 / 3) < 1e-13
    assert r.evaluations > 0
    r = integrate_de(lambda x: 1 / np.sqrt(x), 0.0, 1.0, 1e-12)
    assert abs(r.value - 2) < 1e-10


def test_integrate_de_infinite_complex():
    s = 2.5 + 1j
    r = integrate_de(lambda x: np.exp(-x) * x ** (s - 1), 0.0, math.inf, 1e-14)
    assert abs(r.value - complex_gamma(s)) < 1e-12


def test_integrate_de_relative_target():
    r = integrate_de(lambda x: 1e-20 * np.exp(-x), 1.0, math.inf, 1e-300, target_rel_err=1e-12)
    assert abs(r.value - 1e-20 * math.exp(-1)) < 1e-31


def test_integrate_de_budget():
    with pytest.raises(MaxEvaluations):
        integrate_de(lambda x: np.sin(1 / x), 0.0, 1.0, 1e-15, max_evaluations=200)


def test_integrate_de_domain():
    with pytest.raises(DomainError):
        integrate_de(lambda x: x, 1.0, 0.0, 1e-10)


def test_check_finite():
    with pytest.raises(NonFinite):
        check_finite(complex(float("nan"), 0))
    with pytest.raises(NonFinite):
        integrate_de(lambda x: np.full(x.shape, np.inf), 0.0, 1.0, 1e-10)
