import json
import math
import random
from fractions import Fraction

import numpy as np
import pytest

from eistwist.errors import TruncationInsufficient, UnsupportedPrime
from eistwist.group import fricke, identity, invert, lower, multiply, random_gamma0, translation
from eistwist.newform import (
    ManinTable,
    NewformData,
    PsiCache,
    ap_oracle,
    element_with_cusp,
    evaluate_f,
    l_value_at_1,
    modular_symbol,
    period_to_infinity,
    primes_up_to,
)

N = 37


def brute_ap(p):
    count = 1 + sum(1 for x in range(p) for y in range(p) if (y * y + y - x**3 + x) % p == 0)
    return p + 1 - count


def draw(rng):
    g = random_gamma0(N, rng)
    return multiply(g, fricke(N)) if rng.random() < 0.5 else g


@pytest.mark.parametrize("p,ap", [(2, -2), (3, -3), (5, -2)])
def test_ap_small(p, ap):
    assert ap_oracle(p) == ap


def test_ap_oracle_matches_brute_force():
    for p in primes_up_to(60):
        if p != 37:
            assert ap_oracle(p) == brute_ap(p)


def test_ap_oracle_rejects():
    with pytest.raises(UnsupportedPrime):
        ap_oracle(37)
    with pytest.raises(UnsupportedPrime):
        ap_oracle(15)


def test_canonical_coefficients_against_oracle(nf37):
    for p in primes_up_to(199):
        expected = -1 if p == 37 else ap_oracle(p)
        assert int(nf37.coefficients[p - 1]) == expected


def test_coefficient_invariants(nf37):
    a = nf37.coefficients
    assert a[0] == 1
    assert a[5] == a[1] * a[2]  # a_6
    assert a[3] == a[1] ** 2 - 2  # a_4
    assert a[36 * 37 - 1] == a[36] * a[36 - 1]  # a_{37^2} = a_37^2 = 1
    with pytest.raises(ValueError):
        a[0] = 2


def test_constructor_rejects():
    with pytest.raises(ValueError):
        NewformData(37, np.array([1, -2, -3, 2]), fricke_eigenvalue=-1)
    with pytest.raises(ValueError):
        NewformData(37, np.array([1, -2, -3, 3]))
    with pytest.raises(ValueError):
        NewformData(12, np.array([1]))


def test_json_roundtrip(tmp_path, nf37):
    small = NewformData.canonical(100)
    path = tmp_path / "f.json"
    path.write_text(small.to_json())
    back = NewformData.from_json(path)
    assert np.array_equal(back.coefficients, small.coefficients)
    data = json.loads(small.to_json())
    data["coefficients"][4] += 1
    path.write_text(json.dumps(data))
    with pytest.raises(ValueError):
        NewformData.from_json(path)


def test_evaluate_f_basic(nf37):
    z = 0.21 + 0.4j
    assert abs(evaluate_f(nf37, z + 1) - evaluate_f(nf37, z)) < 1e-13
    assert abs(evaluate_f(nf37, 0.3 + 30j)) < 1e-80


def test_evaluate_f_fricke(nf37):
    # f(W z) = f(-1/(Nz)) = N z^2 f(z) for eigenvalue +1
    z = 0.3j
    lhs = evaluate_f(nf37, -1 / (N * z))
    rhs = N * z * z * evaluate_f(nf37, z)
    assert abs(lhs - rhs) < 1e-9


def test_evaluate_f_truncation():
    small = NewformData(37, np.array(NewformData.canonical(50).coefficients))
    with pytest.raises(TruncationInsufficient):
        evaluate_f(small, 0.01j)


def test_period_to_infinity(nf37):
    z = 0.1 + 0.8j
    assert abs(period_to_infinity(nf37, z + 1) - period_to_infinity(nf37, z)) < 1e-14
    h = 1e-5
    deriv = (period_to_infinity(nf37, z + h) - period_to_infinity(nf37, z - h)) / (2 * h)
    assert abs(deriv + evaluate_f(nf37, z)) < 1e-6
    assert abs(period_to_infinity(nf37, 40j)) < 1e-100


@pytest.mark.parametrize("split", [0.1, 0.3, 1.0])
def test_l_value_vanishes(nf37, split):
    assert abs(l_value_at_1(nf37, split)) < 1e-8


def test_l_value_stable_in_n_max():
    a = l_value_at_1(NewformData.canonical(1000), 0.3)
    b = l_value_at_1(NewformData.canonical(2000), 0.3)
    assert abs(a - b) < 1e-10


def test_psi_trivial_values(nf37, psi37):
    assert modular_symbol(nf37, identity(N), psi37) == 0
    assert abs(modular_symbol(nf37, lower(N), psi37)) < 1e-9
    assert abs(modular_symbol(nf37, translation(N), psi37)) < 1e-12
    assert abs(modular_symbol(nf37, fricke(N))) < 1e-8


def test_psi_homomorphism(nf37, psi37):
    rng = random.Random(7)
    for _ in range(100):
        g, h = draw(rng), draw(rng)
        lhs = modular_symbol(nf37, multiply(g, h), psi37)
        rhs = modular_symbol(nf37, g, psi37) + modular_symbol(nf37, h, psi37)
        assert abs(lhs - rhs) < 1e-9


def test_psi_antisymmetry(nf37, psi37):
    rng = random.Random(8)
    for _ in range(30):
        g = draw(rng)
        assert abs(modular_symbol(nf37, invert(g), psi37) + modular_symbol(nf37, g, psi37)) < 1e-10


def test_psi_parabolic(nf37, psi37):
    rng = random.Random(9)
    for i in range(20):
        g = draw(rng)
        p = translation(N, rng.randint(1, 5)) if i % 2 else lower(N, rng.randint(1, 5))
        conj = multiply(multiply(g, p), invert(g))
        assert abs(modular_symbol(nf37, conj, psi37)) < 1e-9


def test_psi_base_point_independence(nf37):
    rng = random.Random(10)
    for _ in range(10):
        g = random_gamma0(N, rng, bound=2)
        a0, _, c, _ = g.mat
        # base points near the cusp a/c mod 1 at height about 1/c keep
        # both z0 and g^-1 z0 away from the real axis
        r = (a0 / c) % 1.0
        a = modular_symbol(nf37, g, z0=complex(r + 0.2 / c, 0.9 / c))
        b = modular_symbol(nf37, g, z0=complex(r - 0.3 / c, 1.2 / c))
        assert abs(a - b) < 1e-10


def test_psi_direct_vs_manin(nf37):
    rng = random.Random(12)
    for _ in range(30):
        g = draw(rng)
        d = modular_symbol(nf37, g, method="direct")
        m = modular_symbol(nf37, g, method="manin")
        assert abs(d - m) < 1e-10


def test_psi_conjugation_symmetry(nf37):
    # eps = diag(-1, 1) normalises Gamma*, and psi(eps g eps) = -conj psi(g)
    rng = random.Random(13)
    for _ in range(20):
        g = random_gamma0(N, rng)
        a, b, c, d = g.mat
        h = type(g).make(N, a, -b, -c, d)
        assert abs(modular_symbol(nf37, h) + modular_symbol(nf37, g).conjugate()) < 1e-10


def test_psi_lattice_values(nf37):
    # values are integer combinations of two periods
    rng = random.Random(14)
    vals = [modular_symbol(nf37, draw(rng)) for _ in range(40)]
    omega_re, omega_im = 0.3901513, 0.4764223
    for v in vals:
        x, y = v.real / omega_re, v.imag / omega_im
        assert abs(x - round(x)) < 1e-5 and abs(y - round(y)) < 1e-5


def test_element_with_cusp():
    for r in (Fraction(2, 37), Fraction(3, 5), Fraction(-7, 74), None):
        g = element_with_cusp(N, r)
        assert g.cusp() == r
    assert element_with_cusp(6, Fraction(1, 2)) is None


def test_manin_table_unavailable_composite():
    assert ManinTable.build(NewformData.zero(6)) is None


def test_cache_reproduces_fresh(nf37):
    cache = PsiCache(nf37)
    rng = random.Random(15)
    gs = [draw(rng) for _ in range(20)]
    first = [modular_symbol(nf37, g, cache) for g in gs]
    again = [modular_symbol(nf37, g, cache) for g in gs]
    fresh = [modular_symbol(nf37, g, method="direct") for g in gs]
    assert first == again
    assert max(abs(a - b) for a, b in zip(first, fresh)) < 1e-10
    assert cache.hits >= 20


def test_cache_persistence(tmp_path, nf37):
    cache = PsiCache(nf37)
    rng = random.Random(16)
    gs = [draw(rng) for _ in range(10)]
    vals = [modular_symbol(nf37, g, cache) for g in gs]
    path = tmp_path / "psi.bin"
    cache.save(path)
    fresh = PsiCache(nf37)
    assert fresh.load(path)
    assert [modular_symbol(nf37, g, fresh) for g in gs] == vals
    assert fresh.misses == 0
    # corruption is detected, never reused
    raw = bytearray(path.read_bytes())
    raw[-5] ^= 0xFF
    path.write_bytes(bytes(raw))
    assert not PsiCache(nf37).load(path)
    # a different newform invalidates
    cache.save(path)
    assert not PsiCache(NewformData.zero(37)).load(path)


def test_degenerate_psi():
    nf = NewformData.zero(1)
    rng = random.Random(1)
    from eistwist.group import random_element

    for _ in range(10):
        assert modular_symbol(nf, random_element(1, rng)) == 0
    assert l_value_at_1(nf) == 0
    assert evaluate_f(nf, 0.1j) == 0
