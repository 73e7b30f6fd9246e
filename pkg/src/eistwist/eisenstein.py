"""Classical and twisted Eisenstein series on Gamma*, their Fourier coefficients
and the scattering data.

Every sum runs over the double cosets Gamma_a \\ Gamma* / Gamma_oo of module
``group``: a class with lower-left entry c and ratio d/c stands for the whole
translation orbit d + kc, and that orbit is summed in closed form by the
periodic kernel

    F_s(u, y) = sum_k ((u + k)^2 + y^2)^(-s),

so that E_a(z, s; psi) = [y^s] + y^s sum_classes psi c^(-2s) F_s(x + d/c, y).
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special as sp

from .errors import (
    ContinuationUnavailable,
    ConvergenceRegion,
    EnvelopeViolation,
    IllConditioned,
    TailTooLarge,
    ValidationFailure,
)
from .group import (
    CuspData,
    _squarefree_part,
    class_counts,
    class_table,
    cusp_set,
    double_coset_records,
    prime_factors,
)
from .newform import NewformData, PsiCache, modular_symbol
from .special import SQRT_PI, bessel_k, complex_gamma, completed_zeta, gamma_ratio_half

DEFAULT_TOL = 1e-10
C_START = 64.0
C_CEILING = 8192.0
LIPSCHITZ_MIN_Y = 0.5


# ---------------------------------------------------------------------------
# Periodic kernel
# ---------------------------------------------------------------------------


@lru_cache(maxsize=512)
def _lipschitz_coefficients(s: complex, y: float) -> np.ndarray:
    """beta_0, beta_1, ... with F_s(u, y) = beta_0 + 2 sum_n beta_n cos(2 pi n u)."""
    n_max = max(4, int(math.ceil(42.0 / (2 * math.pi * y))) + 2)
    pref = 2 * cmath.exp(s * math.log(math.pi)) / complex_gamma(s)
    betas = [SQRT_PI * gamma_ratio_half(s) * y ** (1 - 2 * s)]
    for n in range(1, n_max + 1):
        k = bessel_k(s - 0.5, 2 * math.pi * n * y)
        betas.append(pref * n ** (s - 0.5) * y ** (0.5 - s) * k)
    return np.array(betas, dtype=complex)


def _tail_integral(s: complex, y: float, A: np.ndarray) -> np.ndarray:
    """int_A^oo (v^2 + y^2)^(-s) dv for A > 2y, by the binomial series in (y/A)^2."""
    q = (y / A) ** 2
    total = np.zeros(A.shape, dtype=complex)
    coef = 1.0 + 0j  # binom(-s, j)
    qj = np.ones(A.shape)
    for j in range(60):
        term = coef * qj / (2 * s + 2 * j - 1)
        total += term
        if np.max(np.abs(term)) < 1e-18 * np.max(np.abs(total)):
            break
        coef *= (-s - j) / (j + 1)
        qj = qj * q
    return total * np.exp((1 - 2 * s) * np.log(A))


def _g_derivs(s: complex, y: float, v: np.ndarray):
    """First and third derivatives of g(v) = (v^2 + y^2)^(-s)."""
    r = v * v + y * y
    g1 = -2 * s * v * np.exp((-s - 1) * np.log(r))
    # g''' = -4 s (s+1) v (2 (s+2) v^2 - 3 r) r^(-s-3) ... written out below
    g3 = (
        -4 * s * (s + 1) * v * (2 * (s + 2) * v * v - 3 * r) * np.exp((-s - 3) * np.log(r))
    )
    return g1, g3


def periodic_kernel(s: complex, u, y: float, method: str = "auto") -> np.ndarray:
    """F_s(u, y) = sum_{k in Z} ((u + k)^2 + y^2)^(-s) for an array of u.

    ``method`` is "lipschitz" (Fourier series in u, K-Bessel coefficients),
    "direct" (a central block of terms plus a midpoint Euler-Maclaurin tail)
    or "auto" (Lipschitz for y >= 0.5).
    """
    s = complex(s)
    u = np.asarray(u, dtype=float)
    u = u - np.floor(u)
    if method == "auto":
        method = "lipschitz" if y >= LIPSCHITZ_MIN_Y else "direct"
    if method == "lipschitz":
        beta = _lipschitz_coefficients(s, float(y))
        n = np.arange(1, beta.size)
        out = np.full(u.shape, beta[0], dtype=complex)
        flat = u.reshape(-1)
        res = out.reshape(-1)
        for start in range(0, flat.size, 4096):
            block = flat[start : start + 4096]
            res[start : start + 4096] += 2 * (np.cos(2 * math.pi * np.outer(block, n)) @ beta[1:])
        return res.reshape(u.shape)
    K = max(40, int(math.ceil(8 * y)))
    ks = np.arange(-K, K + 1)
    flat = u.reshape(-1)
    res = np.empty(flat.size, dtype=complex)
    for start in range(0, flat.size, 2048):
        block = flat[start : start + 2048]
        v = block[:, None] + ks[None, :]
        central = np.exp(-s * np.log(v * v + y * y)).sum(axis=1)
        tails = 0j
        for A in (K + 0.5 + block, K + 0.5 - block):
            g1, g3 = _g_derivs(s, y, A)
            tails = tails + _tail_integral(s, y, A) + g1 / 24 - 7 * g3 / 5760
        res[start : start + 2048] = central + tails
    return res.reshape(u.shape)


# ---------------------------------------------------------------------------
# Class arrays and growth envelopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClassArrays:
    """Double-coset data for a cusp pair as flat arrays, sorted by c."""

    level: int
    a_label: int
    b_label: int
    c_max: float
    c: np.ndarray
    d_over_c: np.ndarray
    records: tuple
    lattices: tuple  # (spacing h, count) per lattice of c-values

    def upto(self, C: float) -> int:
        return int(np.searchsorted(self.c, C, side="right"))


_TABLES: dict[tuple[int, int, int], ClassArrays] = {}


def _c_lattices(recs) -> tuple:
    """Group c-values into lattices c in h Z (c^2 = k r^2 / den^2, k squarefree)."""
    groups: dict[int, list[tuple[int, int]]] = {}
    for r in recs:
        num, den = r.c_sq.numerator, r.c_sq.denominator
        m, k = _squarefree_part(num * den)
        groups.setdefault(k, []).append((m, den))
    out = []
    for k, items in sorted(groups.items()):
        L = math.lcm(*(den for _, den in items))
        g = 0
        for m, den in items:
            g = math.gcd(g, m * (L // den))
        out.append((math.sqrt(k) * g / L, len(items)))
    return tuple(out)


def class_arrays(a: CuspData, b: CuspData, c_max: float) -> ClassArrays:
    """Class table up to c_max, reusing (and slicing) a larger cached table."""
    key = (a.level, a.label, b.label)
    have = _TABLES.get(key)
    if have is None or have.c_max < c_max:
        recs = tuple(class_table(a, b, c_max))
        c = np.array([math.sqrt(r.c_sq) for r in recs])
        dc = np.array([float(r.d_over_c) for r in recs])
        have = ClassArrays(a.level, a.label, b.label, c_max, c, dc, recs, _c_lattices(recs))
        _TABLES[key] = have
    return have


@dataclass(frozen=True)
class Envelope:
    """|psi| <= A + B log(c + |d|); ``A_fit`` is the value fitted on the first half."""

    A: float
    B: float
    A_fit: float

    def at(self, c):
        return self.A + self.B * np.log(2 * np.asarray(c, dtype=float))


def fit_envelope(c: np.ndarray, d_over_c: np.ndarray, psi_abs: np.ndarray) -> Envelope:
    """Fit the envelope on the first half of the data and check it on all of it."""
    if psi_abs.size == 0 or not np.any(psi_abs > 0):
        return Envelope(0.0, 0.0, 0.0)
    x = np.log(c * (1 + d_over_c))
    half = max(1, psi_abs.size // 2)
    xs, ps = x[:half], psi_abs[:half]
    edges = np.quantile(xs, np.linspace(0, 1, 11))
    bx, by = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (xs >= lo) & (xs <= hi)
        if np.any(sel):
            bx.append(xs[sel].mean())
            by.append(ps[sel].max())
    B = 0.0
    if len(bx) >= 2 and np.ptp(bx) > 0:
        B = max(0.0, float(np.polyfit(bx, by, 1)[0]))
    A_fit = float(np.max(ps - B * xs))
    excess = psi_abs / (A_fit + B * x + 1e-300)
    if np.max(excess) > 10.0:
        i = int(np.argmax(excess))
        raise EnvelopeViolation(
            f"|psi| = {psi_abs[i]:.3g} at c = {c[i]:.4g} exceeds 10x the fitted envelope"
        )
    A = max(A_fit, float(np.max(psi_abs - B * x)))
    return Envelope(A, B, A_fit)


@dataclass(eq=False)
class TwistData:
    """psi values on a class table and their envelope."""

    psi: np.ndarray
    envelope: Envelope


_TWISTS: dict[tuple, TwistData] = {}


def twist_data(arr: ClassArrays, nf: NewformData, cache: PsiCache | None = None) -> TwistData:
    key = (arr.level, arr.a_label, arr.b_label, nf.fingerprint())
    have = _TWISTS.get(key)
    n = arr.c.size
    if have is not None and have.psi.size >= n:
        return have
    cache = cache if cache is not None else _default_cache(nf)
    start = 0 if have is None else have.psi.size
    new = np.array([modular_symbol(nf, r.element, cache) for r in arr.records[start:n]], dtype=complex)
    psi = new if have is None else np.concatenate([have.psi, new])
    env = fit_envelope(arr.c, arr.d_over_c, np.abs(psi))
    have = TwistData(psi, env)
    _TWISTS[key] = have
    return have


_CACHES: dict[str, PsiCache] = {}


def _default_cache(nf: NewformData) -> PsiCache:
    key = nf.fingerprint()
    if key not in _CACHES:
        _CACHES[key] = PsiCache(nf)
    return _CACHES[key]


def _lattice_tail(lattices, C: float, A: float, B: float, powers) -> float:
    """Bound for sum over c-values > C of (A + B log 2c) sum_p coef_p c^(-p).

    ``powers`` is a list of (coef, p) with p > 1.  Each lattice h Z contributes
    at most g(C) + (1/h) int_C^oo g for the decreasing summand g.
    """
    total = 0.0
    env_C = A + B * math.log(2 * C)
    g_C = env_C * sum(coef * C ** (-p) for coef, p in powers)
    for h, _ in lattices:
        integral = 0.0
        for coef, p in powers:
            integral += coef * C ** (1 - p) / (p - 1) * (env_C + B / (p - 1))
        total += g_C + integral / h
    return total


# ---------------------------------------------------------------------------
# Eisenstein series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EisensteinParams:
    cusp: CuspData
    s: complex
    c_max: float = C_CEILING
    twisted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "s", complex(self.s))
        bound = 2.0 if self.twisted else 1.0
        if not self.s.real > bound:
            kind = "twisted" if self.twisted else "classical"
            raise ConvergenceRegion(f"{kind} series needs Re s > {bound:g}, got {self.s}")
        if not self.c_max > 0:
            raise ValueError("c_max must be positive")


@dataclass(frozen=True)
class SeriesValue:
    """A truncated series with its certified tail bound."""

    value: complex
    tail_bound: float
    c_max: float
    terms: int

    def __complex__(self):
        return self.value


def _eisenstein_tail(lattices, s: complex, y: float, env: Envelope) -> callable:
    sig = s.real
    b_sig = SQRT_PI * math.exp(sp.gammaln(sig - 0.5) - sp.gammaln(sig))

    def tail(C: float) -> float:
        # per c-value: y^sig [(c y)^(-2 sig) + B_sig (c y)^(1 - 2 sig)]
        powers = [(y ** (-sig), 2 * sig), (b_sig * y ** (1 - sig), 2 * sig - 1)]
        return _lattice_tail(lattices, C, env.A, env.B, powers)

    return tail


def _eisenstein_sum(
    a: CuspData, s: complex, z: complex, c_ceiling: float, tol: float, nf: NewformData | None,
    cache: PsiCache | None, method: str = "auto", c_min: float = 0.0,
) -> SeriesValue:
    x, y = z.real, z.imag
    if y <= 0:
        raise ValueError("Im z must be positive")
    b = cusp_set(a.level)[0]
    C = min(C_START, c_ceiling)
    while True:
        arr = class_arrays(a, b, C)
        if nf is None:
            env = Envelope(1.0, 0.0, 1.0)
        else:
            env = twist_data(arr, nf, cache).envelope
        tail = _eisenstein_tail(arr.lattices, s, y, env)(C)
        if (tail <= tol and C >= c_min) or C >= c_ceiling:
            break
        C = min(2 * C, c_ceiling)
    if tail > tol:
        raise TailTooLarge(f"tail bound {tail:.3g} above {tol:.3g} at c_max = {C:g}")
    n = arr.upto(C)
    c = arr.c[:n]
    if nf is None:
        weights = np.ones(n, dtype=complex)
    elif nf.degenerate:
        return SeriesValue(0j, 0.0, C, n)
    else:
        weights = twist_data(arr, nf, cache).psi[:n]
    keep = weights != 0
    F = periodic_kernel(s, x + arr.d_over_c[:n][keep], y, method)
    ys = cmath.exp(s * math.log(y))
    body = np.sum(weights[keep] * np.exp(-2 * s * np.log(c[keep])) * F)
    value = ys * body
    if nf is None and a.is_infinity:
        value += ys
        if len(cusp_set(a.level)) == 1:
            # mean part of the omitted classes: their constant terms, with the
            # class count A(t) ~ kappa t^2 beyond C (partial summation)
            kappa = 1.0 / (math.pi * covolume(a.level))
            d_tail = -n * C ** (-2 * s) + kappa * s * C ** (2 - 2 * s) / (s - 1)
            corr = constant_prefactor(s) * cmath.exp((1 - s) * math.log(y)) * d_tail
            value += corr
            tail += abs(corr)
    return SeriesValue(complex(value), float(tail), float(C), n)


def eval_classical(
    params: EisensteinParams, z: complex, tol: float = DEFAULT_TOL, method: str = "auto", c_min: float = 0.0,
) -> SeriesValue:
    """E_a(z, s), the coset sum of Im(sigma_a^-1 gamma z)^s over Gamma_a \\ Gamma*.

    The truncation point is the first C = 64 * 2^k with C >= c_min whose tail
    bound is below ``tol``.
    """
    return _eisenstein_sum(params.cusp, params.s, complex(z), params.c_max, tol, None, None, method, c_min)


def eval_twisted(
    params: EisensteinParams, z: complex, nf: NewformData, cache: PsiCache | None = None,
    tol: float = DEFAULT_TOL, method: str = "auto", c_min: float = 0.0,
) -> SeriesValue:
    """E_a(z, s; psi) = sum psi(gamma) Im(sigma_a^-1 gamma z)^s with a certified tail."""
    if not params.twisted:
        params = EisensteinParams(params.cusp, params.s, params.c_max, True)
    return _eisenstein_sum(params.cusp, params.s, complex(z), params.c_max, tol, nf, cache, method, c_min)


# ---------------------------------------------------------------------------
# Fourier coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FourierCoefficient:
    a_index: int
    b_index: int
    n: int
    s: complex
    value: complex
    method: str
    error_estimate: float
    kind: str = "twisted"
    ys_value: complex | None = None  # y^s coefficient, n = 0 only

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error_estimate must be non-negative")


def whittaker_norm(s: complex, n: int, y: float) -> complex:
    """2 sqrt(|n| y) K_{s-1/2}(2 pi |n| y), the modulus factor of W_s(n z)."""
    return 2 * math.sqrt(abs(n) * y) * bessel_k(complex(s) - 0.5, 2 * math.pi * abs(n) * y)


def fourier_quadrature(
    a: CuspData, b: CuspData, n: int, s: complex, y: float, nf: NewformData | None = None,
    points: int = 32, tol: float = 1e-12, cache: PsiCache | None = None,
) -> FourierCoefficient:
    """Fourier coefficient of E_a(sigma_b z, s; .) from samples along Im z = y.

    The x-integral is the trapezoidal rule on ``points`` equispaced nodes,
    which is spectrally accurate for this periodic analytic integrand.  For
    n = 0 the constant term is sampled at heights y and 2y and split into its
    y^s and y^(1-s) parts by a 2x2 solve.
    """
    s = complex(s)
    twisted = nf is not None
    params = EisensteinParams(a, s, C_CEILING, twisted)
    kind = "twisted" if twisted else "classical"

    def constant(height: float, m: int):
        xs = np.arange(points) / points
        vals, tails = [], []
        for x in xs:
            z = b.scaling.act(complex(x, height))
            v = eval_twisted(params, z, nf, cache, tol) if twisted else eval_classical(params, z, tol)
            vals.append(v.value)
            tails.append(v.tail_bound)
        vals = np.array(vals)
        phase = np.exp(-2j * math.pi * m * xs)
        full = np.mean(vals * phase)
        half = np.mean((vals * phase)[::2])
        return full, abs(full - half) + max(tails)

    if n != 0:
        coeff, err = constant(y, n)
        norm = whittaker_norm(s, n, y)
        return FourierCoefficient(
            a.label, b.label, n, s, complex(coeff / norm), "quadrature", float(err / abs(norm)), kind
        )
    c1, e1 = constant(y, 0)
    c2, e2 = constant(2 * y, 0)
    M = np.array([[y ** s, y ** (1 - s)], [(2 * y) ** s, (2 * y) ** (1 - s)]], dtype=complex)
    cond = np.linalg.cond(M)
    if cond > 1e6:
        raise IllConditioned(f"two-height solve has condition number {cond:.3g}")
    ys_coef, other = np.linalg.solve(M, np.array([c1, c2]))
    err = float(np.linalg.norm(np.linalg.inv(M), 2) * math.hypot(e1, e2))
    return FourierCoefficient(
        a.label, b.label, 0, s, complex(other), "quadrature", err, kind, complex(ys_coef)
    )


def _record_weights(recs, nf: NewformData | None, cache: PsiCache | None) -> np.ndarray:
    if nf is None:
        return np.ones(len(recs), dtype=complex)
    if nf.degenerate:
        return np.zeros(len(recs), dtype=complex)
    cache = cache if cache is not None else _default_cache(nf)
    return np.array([modular_symbol(nf, r.element, cache) for r in recs], dtype=complex)


def kloosterman_twisted(
    a: CuspData, b: CuspData, m: int, n: int, c, nf: NewformData, cache: PsiCache | None = None
) -> complex:
    """S_ab(m, n, f; c) = sum psi(sigma_a gamma sigma_b^-1) e(n gamma_a / c + m gamma_d / c).

    ``c`` is the real lower-left entry or, exactly, its square as a Fraction.
    Returns 0 when c is not a lower-left entry.
    """
    recs = double_coset_records(a, b, c)
    if not recs:
        return 0j
    w = _record_weights(recs, nf, cache)
    phase = np.array(
        [cmath.exp(2j * math.pi * float(_mod1(n * r.a_over_c + m * r.d_over_c))) for r in recs]
    )
    return complex(np.sum(w * phase))


def kloosterman(a: CuspData, b: CuspData, m: int, n: int, c) -> complex:
    """Classical S_ab(m, n; c): the same sum with unit weights."""
    recs = double_coset_records(a, b, c)
    return complex(
        sum(cmath.exp(2j * math.pi * float(_mod1(n * r.a_over_c + m * r.d_over_c))) for r in recs)
    )


def _mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


def _series_tail(arr: ClassArrays, C: float, sig: float, env: Envelope) -> float:
    # at most c + 1 classes per c-value (d/c distinct mod 1, real d spaced >= 1)
    return _lattice_tail(arr.lattices, C, env.A, env.B, [(1.0, 2 * sig - 1), (1.0, 2 * sig)])


def _c_series(
    a: CuspData, b: CuspData, n: int, s: complex, nf: NewformData | None, c_ceiling: float,
    tol: float, cache: PsiCache | None, c_min: float = 0.0,
) -> SeriesValue:
    """sum_c S_ab(n, 0; c) c^(-2s), truncated with an envelope tail bound."""
    sig = s.real
    C = min(C_START, c_ceiling)
    while True:
        arr = class_arrays(a, b, C)
        env = Envelope(1.0, 0.0, 1.0) if nf is None else twist_data(arr, nf, cache).envelope
        tail = _series_tail(arr, C, sig, env)
        if (tail <= tol and C >= c_min) or C >= c_ceiling:
            break
        C = min(2 * C, c_ceiling)
    if tail > tol:
        raise TailTooLarge(f"c-series tail {tail:.3g} above {tol:.3g} at c_max = {C:g}")
    k = arr.upto(C)
    if nf is None:
        w = np.ones(k, dtype=complex)
    elif nf.degenerate:
        return SeriesValue(0j, 0.0, C, k)
    else:
        w = twist_data(arr, nf, cache).psi[:k]
    phase = np.exp(2j * math.pi * ((n * arr.d_over_c[:k]) % 1.0)) if n else 1.0
    total = np.sum(w * phase * np.exp(-2 * s * np.log(arr.c[:k])))
    return SeriesValue(complex(total), float(tail), float(C), k)


def fourier_series(
    a: CuspData, b: CuspData, n: int, s: complex, nf: NewformData | None = None,
    c_max: float = C_CEILING, tol: float = 1e-12, cache: PsiCache | None = None, c_min: float = 0.0,
) -> FourierCoefficient:
    """phi_ab(n, s; f) = (pi^s / Gamma(s)) |n|^(s-1) sum_c S_ab(n, 0, f; c) / c^(2s)."""
    s = complex(s)
    if n == 0:
        raise ValueError("fourier_series is for n != 0; use scattering for the constant term")
    bound = 2.0 if nf is not None else 1.0
    if not s.real > bound:
        raise ConvergenceRegion(f"c-series needs Re s > {bound:g}")
    series = _c_series(a, b, n, s, nf, c_max, tol, cache, c_min)
    pref = cmath.exp(s * math.log(math.pi)) / complex_gamma(s) * abs(n) ** (s - 1)
    kind = "twisted" if nf is not None else "classical"
    return FourierCoefficient(
        a.label, b.label, n, s, complex(pref * series.value), "kloosterman-series",
        float(abs(pref) * series.tail_bound), kind,
    )


# ---------------------------------------------------------------------------
# Scattering
# ---------------------------------------------------------------------------


def constant_prefactor(s: complex) -> complex:
    """sqrt(pi) Gamma(s - 1/2) / Gamma(s): the y^(1-2s) coefficient of int F_s."""
    return SQRT_PI * gamma_ratio_half(s)


def covolume(N: int) -> float:
    """Hyperbolic area of Gamma* \\ H."""
    index = 1
    for p in prime_factors(N):
        index *= p + 1
    return math.pi / 3 * (index / 2 if N > 1 else 1)


@dataclass(frozen=True)
class ScatteringData:
    matrix: np.ndarray
    kind: str
    s: complex
    continuation_certificate: str

    @property
    def scalar(self) -> complex:
        return complex(self.matrix[0, 0])


class ClassicalScattering:
    """Classical phi(s) for a one-cusp level, certified two ways.

    The c-sum D(s) = sum_c S(0,0;c) c^(-2s) is a Dirichlet series in the
    integers c^2.  Dividing out zeta(2s-1)/zeta(2s) (Dirichlet convolution
    with n |-> prod_{p | n} (1 - p) on squares) must leave a series supported
    on the powers of N; its coefficients, multiplied by 1 - X^2 with
    X = N^(-s), must terminate in a polynomial P.  Both facts are checked on
    exact class counts, giving D(s) = zeta(2s-1)/zeta(2s) P(X)/(1 - X^2).
    """

    GRID = tuple(
        complex(re, im) for re in np.linspace(1.5, 3.0, 5) for im in (-4.0, 0.0, 1.5, 6.0)
    )

    def __init__(self, level: int, c_direct: float | None = None):
        self.level = N = level
        if c_direct is None:
            # the sparsest lattice of c-values (spacing N) sets the truncation
            c_direct = 2500.0 if N == 1 else 1100.0 * N
        if len(cusp_set(N)) != 1:
            raise ContinuationUnavailable("closed form implemented for one-cusp levels only")
        inf = cusp_set(N)[0]
        fit_c = float(N * N) if N > 1 else 60.0
        counts = {int(k): v for k, v in class_counts(inf, inf, max(fit_c, c_direct)).items()}
        self.counts = counts
        self.K_max = int(round(fit_c * fit_c))
        self.numerator = self._fit(counts)
        self.c_direct = c_direct
        keys = np.array(sorted(counts), dtype=float)
        self._K = keys
        self._mult = np.array([counts[int(k)] for k in keys], dtype=float)
        self.validated = False

    def _fit(self, counts: dict[int, int]) -> tuple[int, ...]:
        N, Kmax = self.level, self.K_max

        def g(n: int) -> int:
            out = 1
            for p in prime_factors(n):
                out *= 1 - p
            return out

        B: dict[int, int] = {}
        for K0, A in counts.items():
            n = 1
            while K0 * n * n <= Kmax:
                K = K0 * n * n
                B[K] = B.get(K, 0) + A * g(n)
                n += 1
        B = {K: v for K, v in B.items() if v}
        if N == 1:
            if set(B) != {1}:
                raise ValidationFailure(f"unexpected support {sorted(B)[:5]} after dividing out zeta")
            return (B[1],)
        powers = []
        j, K = 0, 1
        while K <= Kmax:
            powers.append(K)
            j, K = j + 1, K * N
        stray = [K for K in B if K not in powers]
        if stray:
            raise ValidationFailure(f"quotient series has terms off the powers of N: {stray[:5]}")
        b = [B.get(K, 0) for K in powers]
        P = [b[i] - (b[i - 2] if i >= 2 else 0) for i in range(len(b))]
        while P and P[-1] == 0:
            P.pop()
        if len(P) >= len(b):
            raise ValidationFailure("numerator polynomial does not terminate within the fitted range")
        return tuple(P)

    def ratio(self, s: complex) -> complex:
        """P(X) / (1 - X^2), X = N^(-s)."""
        if self.level == 1:
            return complex(self.numerator[0])
        X = cmath.exp(-s * math.log(self.level))
        return sum(p * X**j for j, p in enumerate(self.numerator)) / (1 - X * X)

    def closed_form(self, s: complex) -> complex:
        s = complex(s)
        # sqrt(pi) Gamma(s-1/2) zeta(2s-1) / (Gamma(s) zeta(2s)) = xi(2s-1) / xi(2s)
        return completed_zeta(2 * s - 1) / completed_zeta(2 * s) * self.ratio(s)

    def direct(self, s: complex) -> complex:
        """Direct c-sum plus the tail sum_{c > C}, from A(t) ~ kappa t^2 with
        kappa = 1 / (pi vol(Gamma* \\ H)), by partial summation."""
        s = complex(s)
        if not s.real > 1:
            raise ConvergenceRegion("direct classical series needs Re s > 1")
        C = self.c_direct
        keep = self._K <= C * C
        body = np.sum(self._mult[keep] * np.exp(-s * np.log(self._K[keep])))
        count = float(self._mult[keep].sum())
        kappa = 1.0 / (math.pi * covolume(self.level))
        tail = -count * C ** (-2 * s) + kappa * s * C ** (2 - 2 * s) / (s - 1)
        return constant_prefactor(s) * complex(body + tail)

    def validate(self, tol: float = 1e-8) -> float:
        worst = 0.0
        for s in self.GRID:
            a, b = self.closed_form(s), self.direct(s)
            worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
        if worst > tol:
            raise ValidationFailure(f"closed form and direct sum differ by {worst:.3g}")
        self.validated = True
        return worst


@lru_cache(maxsize=None)
def classical_model(level: int) -> ClassicalScattering:
    model = ClassicalScattering(level)
    model.validate()
    return model


def scattering(
    s: complex, kind: str = "classical", nf: NewformData | None = None, level: int | None = None,
    path: str = "auto", tol: float = 1e-12, cache: PsiCache | None = None,
) -> ScatteringData:
    """Phi(s) or Phi(s; f), as a matrix over the cusps of Gamma*.

    Classical: closed form (validated against the direct sum on an overlap
    grid) on one-cusp levels; direct sum elsewhere in Re s > 1.  Twisted:
    direct sum, Re s > 2 only.
    """
    s = complex(s)
    if kind == "twisted":
        if nf is None:
            raise ValueError("twisted scattering needs a newform")
        if not s.real > 2:
            raise ContinuationUnavailable("twisted constant terms are only available for Re s > 2")
        cusps = cusp_set(nf.level)
        m = np.zeros((len(cusps), len(cusps)), dtype=complex)
        for i, a in enumerate(cusps):
            for j, b in enumerate(cusps):
                series = _c_series(a, b, 0, s, nf, C_CEILING, tol, cache)
                m[i, j] = constant_prefactor(s) * series.value
        return ScatteringData(m, "twisted", s, "direct-sum")
    if kind != "classical":
        raise ValueError(f"unknown kind {kind!r}")
    N = level if level is not None else (nf.level if nf is not None else 1)
    cusps = cusp_set(N)
    if len(cusps) == 1 and path in ("auto", "closed-form"):
        return ScatteringData(np.array([[classical_model(N).closed_form(s)]]), "classical", s, "closed-form")
    if len(cusps) == 1 and path == "direct-sum":
        return ScatteringData(np.array([[classical_model(N).direct(s)]]), "classical", s, "direct-sum")
    if not s.real > 1:
        raise ContinuationUnavailable("multi-cusp classical scattering is only available for Re s > 1")
    m = np.zeros((len(cusps), len(cusps)), dtype=complex)
    for i, a in enumerate(cusps):
        for j, b in enumerate(cusps):
            m[i, j] = constant_prefactor(s) * _c_series(a, b, 0, s, None, C_CEILING, tol, None).value
    return ScatteringData(m, "classical", s, "direct-sum")


# ---------------------------------------------------------------------------
# Completed series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompletedValue:
    value: complex
    twisted: SeriesValue
    classical: SeriesValue
    correction: complex  # 1/2 phi(w; f) phi(1 - w)

    @property
    def error_bound(self) -> float:
        return self.twisted.tail_bound + abs(self.correction) * self.classical.tail_bound


def completion_factor(w: complex, nf: NewformData, cache: PsiCache | None = None) -> complex:
    """1/2 phi(w; f) phi(1 - w) in the one-cusp case."""
    if nf.degenerate:
        return 0j
    if len(cusp_set(nf.level)) != 1:
        raise ContinuationUnavailable("completed series needs the classical continuation (one cusp)")
    phi_f = scattering(w, "twisted", nf, cache=cache).scalar
    phi_1mw = scattering(1 - complex(w), "classical", level=nf.level).scalar
    return 0.5 * phi_f * phi_1mw


def eval_completed(
    a: CuspData, z: complex, w: complex, nf: NewformData, cache: PsiCache | None = None,
    tol: float = DEFAULT_TOL,
) -> CompletedValue:
    """E~_a(z, w; f) = E_a(z, w; f) - 1/2 phi(w; f) phi(1 - w) E_a(z, w)."""
    w = complex(w)
    params = EisensteinParams(a, w, C_CEILING, True)
    tw = eval_twisted(params, z, nf, cache, tol)
    corr = completion_factor(w, nf, cache)
    cl = eval_classical(EisensteinParams(a, w, C_CEILING, False), z, tol)
    return CompletedValue(tw.value - corr * cl.value, tw, cl, corr)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("kind", "a", "b", "n", "re_s", "im_s", "re_value", "im_value", "method", "error_estimate")


def coefficient_rows(coeffs) -> list[dict]:
    return [
        {
            "kind": c.kind,
            "a": c.a_index,
            "b": c.b_index,
            "n": c.n,
            "re_s": c.s.real,
            "im_s": c.s.imag,
            "re_value": c.value.real,
            "im_value": c.value.imag,
            "method": c.method,
            "error_estimate": c.error_estimate,
        }
        for c in coeffs
    ]


def write_coefficient_csv(path: str | Path, coeffs) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(coefficient_rows(coeffs))
    return path
