import cmath
import csv
import math

import mpmath
import numpy as np
import pytest

from eistwist.eisenstein import (
    CSV_COLUMNS,
    EisensteinParams,
    FourierCoefficient,
    classical_model,
    completion_factor,
    covolume,
    eval_classical,
    eval_completed,
    eval_twisted,
    fourier_quadrature,
    fourier_series,
    kloosterman,
    kloosterman_twisted,
    periodic_kernel,
    scattering,
    whittaker_norm,
    write_coefficient_csv,
)
from eistwist.errors import ContinuationUnavailable, ConvergenceRegion, TailTooLarge
from eistwist.group import fricke

CATALAN = float(mpmath.catalan)


def brute_kernel(s, u, y, K=20000):
    k = np.arange(-K, K + 1)
    return np.sum(((u + k) ** 2 + y * y) ** (-s))


@pytest.mark.parametrize("s", [2.5, 3 + 1j, 1.7 - 0.5j])
@pytest.mark.parametrize("y", [0.55, 1.0, 2.0])
def test_kernel_methods_agree(s, y):
    u = np.array([0.0, 0.13, 0.5, 0.77])
    a = periodic_kernel(s, u, y, "lipschitz")
    b = periodic_kernel(s, u, y, "direct")
    assert np.max(np.abs(a - b)) < 1e-12 * np.max(np.abs(a))


@pytest.mark.parametrize("y", [0.05, 0.3])
def test_kernel_small_height_against_brute_force(y):
    s = 2.5 + 0.5j
    u = 0.31
    ref = brute_kernel(s, u, y)
    assert abs(periodic_kernel(s, np.array([u]), y)[0] - ref) < 1e-10 * abs(ref)


def test_kernel_periodic_and_even():
    s, y = 3.0, 0.4
    u = np.array([0.2, 1.2, -0.2, 0.8])
    v = periodic_kernel(s, u, y)
    assert abs(v[0] - v[1]) < 1e-14 and abs(v[0] - v[2]) < 1e-14 and abs(v[0] - v[3]) < 1e-14


def test_params_convergence_region(inf37):
    with pytest.raises(ConvergenceRegion):
        EisensteinParams(inf37, 1.0)
    with pytest.raises(ConvergenceRegion):
        EisensteinParams(inf37, 2.0, twisted=True)
    with pytest.raises(ValueError):
        EisensteinParams(inf37, 3.0, c_max=0)
    assert EisensteinParams(inf37, 3).s == 3 + 0j


def test_classical_level_one_lattice_sum(inf1):
    # E(i, 2) = 1/2 sum_{(c,d)=1} |ci + d|^-4 = 4 zeta(2) beta(2) / (2 zeta(4)) = 30 G / pi^2
    # the certified bound decays only like 1/C at s = 2; the mean-tail
    # correction makes the actual error far smaller
    v = eval_classical(EisensteinParams(inf1, 2, c_max=256), 1j, tol=1e-4, c_min=256)
    ref = 30 * CATALAN / math.pi**2
    assert abs(v.value - ref) < 1e-6 * ref
    assert v.tail_bound < 1e-4
    assert abs(ref - 2.784202) < 1e-6


def test_classical_level_one_invariance(inf1):
    p = EisensteinParams(inf1, 3.5 + 1j)
    z = 0.2 + 1.1j
    a = eval_classical(p, z, tol=1e-9).value
    b = eval_classical(p, -1 / z, tol=1e-9).value
    c = eval_classical(p, z + 1, tol=1e-9).value
    assert abs(a - b) < 1e-7 * abs(a) and abs(a - c) < 1e-12 * abs(a)


def test_classical_fricke_invariance(inf37):
    p = EisensteinParams(inf37, 3)
    z = 0.1 + 0.4j
    a = eval_classical(p, z, tol=1e-10).value
    b = eval_classical(p, fricke(37).act(z), tol=1e-10).value
    assert abs(a - b) < 1e-8


def test_tail_too_large(inf37, nf37, psi37):
    with pytest.raises(TailTooLarge):
        eval_twisted(EisensteinParams(inf37, 2.5, 64.0, True), 0.01 + 0.05j, nf37, psi37, tol=1e-12)


def test_twisted_imaginary_on_axis(inf37, nf37, psi37):
    # psi(eps g eps) = -conj psi(g) makes E(iy; f) purely imaginary
    v = eval_twisted(EisensteinParams(inf37, 3, twisted=True), 0.4j, nf37, psi37, tol=1e-10)
    assert abs(v.value.real) < 1e-12 and abs(v.value.imag) > 1e-8


def test_twisted_conjugation(inf37, nf37, psi37):
    p = EisensteinParams(inf37, 3, twisted=True)
    z = 0.23 + 0.35j
    a = eval_twisted(p, z, nf37, psi37, tol=1e-10).value
    b = eval_twisted(p, -z.conjugate(), nf37, psi37, tol=1e-10).value
    assert abs(a + b.conjugate()) < 1e-10


def test_twisted_kloosterman_imaginary(inf37, nf37, psi37):
    for c2 in (37, 4 * 37, 9 * 37):
        S = kloosterman_twisted(inf37, inf37, 1, 0, math.sqrt(c2), nf37, psi37)
        assert abs(S.real) < 1e-10
    assert kloosterman_twisted(inf37, inf37, 1, 0, 5.0, nf37, psi37) == 0


def test_twisted_constant_kloosterman_vanishes(inf37, nf37, psi37):
    for k in (1, 2, 3, 5, 7):
        assert abs(kloosterman_twisted(inf37, inf37, 0, 0, k * math.sqrt(37), nf37, psi37)) < 1e-11


def test_classical_kloosterman_ramanujan(inf1):
    # S(n, 0; c) at level one is the Ramanujan sum c_c(n)
    assert abs(kloosterman(inf1, inf1, 1, 0, 6.0) - 1) < 1e-12  # mu(6)
    assert abs(kloosterman(inf1, inf1, 0, 0, 6.0) - 2) < 1e-12  # phi(6)
    assert abs(kloosterman(inf1, inf1, 6, 0, 6.0) - 2) < 1e-12


def test_classical_fourier_two_methods(inf1):
    s = 3.5 + 0.5j
    for n in (1, 3):
        a = fourier_series(inf1, inf1, n, s, None, tol=1e-10)
        b = fourier_quadrature(inf1, inf1, n, s, 0.8, None, tol=1e-11)
        assert abs(a.value - b.value) < 1e-7 * abs(a.value)


def test_classical_constant_term_by_quadrature(inf1):
    s = 3.5 + 0j
    c = fourier_quadrature(inf1, inf1, 0, s, 1.0, None, tol=1e-11)
    assert abs(c.ys_value - 1) < 1e-7
    phi = scattering(s, "classical", level=1).scalar
    assert abs(c.value - phi) < 1e-7 * abs(phi)


@pytest.mark.slow
def test_twisted_fourier_two_methods(inf37, nf37, psi37):
    a = fourier_series(inf37, inf37, 2, 3, nf37, tol=1e-10, cache=psi37)
    b = fourier_quadrature(inf37, inf37, 2, 3, 0.5, nf37, tol=1e-10, cache=psi37)
    assert abs(a.value - b.value) < 1e-4 * max(abs(a.value), abs(b.value))
    assert abs(a.value.real) < 1e-12 * abs(a.value) + 1e-20


def test_fourier_series_rejects(inf37, nf37):
    with pytest.raises(ValueError):
        fourier_series(inf37, inf37, 0, 3, nf37)
    with pytest.raises(ConvergenceRegion):
        fourier_series(inf37, inf37, 1, 1.9, nf37)


def test_whittaker_norm_decays():
    a = whittaker_norm(2.5, 1, 0.5)
    b = whittaker_norm(2.5, 1, 2.0)
    assert a.real > 0 and abs(a.imag) < 1e-15
    assert abs(b) < abs(a) * math.exp(-2 * math.pi)


def test_coefficient_validation():
    with pytest.raises(ValueError):
        FourierCoefficient(0, 0, 1, 2.5, 1j, "x", -1.0)


def test_covolume():
    assert abs(covolume(1) - math.pi / 3) < 1e-15
    assert abs(covolume(37) - math.pi / 3 * 19) < 1e-12


def test_scattering_level_one():
    model = classical_model(1)
    assert model.numerator == (1,)
    assert model.validate() < 1e-8
    for s in (2, 1.5 + 2j, 0.25 + 0.5j):
        assert abs(model.closed_form(s) * model.closed_form(1 - s) - 1) < 1e-10


def test_scattering_level_37_fit_and_certificate():
    model = classical_model(37)
    assert model.numerator == (0, 1, 36, -37)
    assert model.validated
    assert model.validate() < 1e-8
    for s in (2, 1.7 + 3j, 0.3 + 1j, 2.5):
        assert abs(model.closed_form(s) * model.closed_form(1 - s) - 1) < 1e-8


def test_scattering_paths():
    s = 2.2 + 0.4j
    a = scattering(s, level=37).scalar
    b = scattering(s, level=37, path="direct-sum").scalar
    assert abs(a - b) < 1e-8 * abs(a)
    with pytest.raises(ContinuationUnavailable):
        scattering(0.3, level=6)
    with pytest.raises(ValueError):
        scattering(2.5, kind="twisted")


def test_twisted_scattering_vanishes(nf37, psi37):
    # S(0, 0, f; c) = 0 for every c at this level
    phi = scattering(2.6, "twisted", nf37, cache=psi37).scalar
    assert abs(phi) < 1e-15
    with pytest.raises(ContinuationUnavailable):
        scattering(1.5, "twisted", nf37)


def test_completed_series_fricke(inf37, nf37, psi37):
    W = fricke(37)
    z = 0.3 + 0.9j
    a = eval_completed(inf37, z, 2.5, nf37, psi37, tol=1e-9)
    b = eval_completed(inf37, W.act(z), 2.5, nf37, psi37, tol=1e-9)
    assert abs(a.value - b.value) < 1e-5
    assert a.error_bound >= 0


def test_degenerate_twisted_vanishes(inf1, nf1):
    p = EisensteinParams(inf1, 3, twisted=True)
    assert eval_twisted(p, 0.2 + 0.7j, nf1).value == 0
    assert fourier_series(inf1, inf1, 1, 3, nf1).value == 0
    assert fourier_quadrature(inf1, inf1, 1, 3, 0.8, nf1).value == 0
    assert scattering(3, "twisted", nf1).scalar == 0
    assert completion_factor(3, nf1) == 0
    assert eval_completed(inf1, 0.1 + 1j, 3, nf1).value == 0
    assert kloosterman_twisted(inf1, inf1, 1, 0, 5.0, nf1) == 0


def test_coefficient_csv(tmp_path, inf1):
    coeffs = [
        fourier_series(inf1, inf1, n, 4, None, tol=1e-10) for n in (1, 2)
    ] + [fourier_quadrature(inf1, inf1, 1, 4, 0.8, None, tol=1e-10)]
    path = write_coefficient_csv(tmp_path / "c.csv", coeffs)
    rows = list(csv.DictReader(path.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3
    assert {r["method"] for r in rows} == {"kloosterman-series", "quadrature"}
    assert all(float(r["error_estimate"]) >= 0 for r in rows)
    v = complex(float(rows[0]["re_value"]), float(rows[0]["im_value"]))
    assert cmath.isclose(v, coeffs[0].value, rel_tol=1e-15)
