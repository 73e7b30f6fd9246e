"""Exact arithmetic in Gamma_0(N), the Fricke involution W_N and Gamma* = <Gamma_0(N), W_N>.

Elements of Gamma* are stored as an integer matrix g in Gamma_0(N) plus a flag;
the flagged element is the real matrix g W_N with
W_N = (0, -1/sqrt N; sqrt N, 0).  sqrt N never enters the arithmetic: every
real matrix that occurs is M / sqrt(e) with M rational and e squarefree.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np

from .errors import IdentityInput, UnsupportedLevel


def is_squarefree(n: int) -> bool:
    if n < 1:
        return False
    p = 2
    while p * p <= n:
        if n % (p * p) == 0:
            return False
        p += 1
    return True


def prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def _check_level(N: int) -> None:
    if not is_squarefree(N):
        raise UnsupportedLevel(f"level {N} is not squarefree")


def _mat_mul(x, y):
    a, b, c, d = x
    p, q, r, s = y
    return (a * p + b * r, a * q + b * s, c * p + d * r, c * q + d * s)


# ---------------------------------------------------------------------------
# Group elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class GroupElement:
    """Projective element of Gamma* for level N.

    Build instances with :meth:`make`, which puts the sign into canonical form
    (bottom row of the real matrix has c > 0, or c = 0 and d > 0).
    """

    level: int
    a: int
    b: int
    c: int
    d: int
    fricke: bool = False

    @classmethod
    def make(cls, N: int, a: int, b: int, c: int, d: int, fricke: bool = False) -> "GroupElement":
        if a * d - b * c != 1:
            raise ValueError(f"determinant of ({a},{b};{c},{d}) is not 1")
        if c % N:
            raise ValueError(f"lower-left entry {c} not divisible by {N}")
        if fricke and N == 1:
            # W_1 = S lies in SL2(Z)
            a, b, c, d = _mat_mul((a, b, c, d), (0, -1, 1, 0))
            fricke = False
        if fricke:
            # real bottom row is (d sqrt N, -c / sqrt N)
            neg = d < 0 or (d == 0 and c > 0)
        else:
            neg = c < 0 or (c == 0 and d < 0)
        if neg:
            a, b, c, d = -a, -b, -c, -d
        return cls(N, a, b, c, d, fricke)

    @property
    def mat(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    def scaled(self) -> tuple[tuple[int, int, int, int], int]:
        """(M, e) with real matrix M / sqrt(e)."""
        a, b, c, d = self.mat
        if self.fricke:
            N = self.level
            return (b * N, -a, d * N, -c), N
        return (a, b, c, d), 1

    def real(self) -> np.ndarray:
        M, e = self.scaled()
        return np.array(M, dtype=float).reshape(2, 2) / math.sqrt(e)

    def bottom_row(self) -> tuple[float, float]:
        M, e = self.scaled()
        r = math.sqrt(e)
        return M[2] / r, M[3] / r

    def cusp(self) -> Fraction | None:
        """Image of infinity, None standing for infinity itself."""
        M, _ = self.scaled()
        if M[2] == 0:
            return None
        return Fraction(M[0], M[2])

    def act(self, z):
        M, e = self.scaled()
        # the 1/sqrt(e) factors cancel in the Moebius action
        return (M[0] * z + M[1]) / (M[2] * z + M[3])

    def is_identity(self) -> bool:
        return not self.fricke and self.mat == (1, 0, 0, 1)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def __repr__(self):
        tag = "*W" if self.fricke else ""
        return f"[{self.a},{self.b};{self.c},{self.d}]{tag}@{self.level}"


def identity(N: int) -> GroupElement:
    return GroupElement.make(N, 1, 0, 0, 1)


def fricke(N: int) -> GroupElement:
    return GroupElement.make(N, 1, 0, 0, 1, True)


def translation(N: int, m: int = 1) -> GroupElement:
    return GroupElement.make(N, 1, m, 0, 1)


def lower(N: int, m: int = 1) -> GroupElement:
    """(1, 0; mN, 1), the parabolic generator fixing the cusp 0."""
    return GroupElement.make(N, 1, 0, m * N, 1)


def _conj_by_fricke(g, N):
    """W g W^{-1} for g in Gamma_0(N), again in Gamma_0(N)."""
    a, b, c, d = g
    return (d, -c // N, -b * N, a)


def multiply(x: GroupElement, y: GroupElement) -> GroupElement:
    if x.level != y.level:
        raise ValueError("elements of different levels")
    N = x.level
    if not x.fricke:
        m = _mat_mul(x.mat, y.mat)
        return GroupElement.make(N, *m, fricke=y.fricke)
    # g1 W g2 = g1 (W g2 W^-1) W, and W^2 = -1 projectively
    m = _mat_mul(x.mat, _conj_by_fricke(y.mat, N))
    return GroupElement.make(N, *m, fricke=not y.fricke)


def invert(x: GroupElement) -> GroupElement:
    a, b, c, d = x.mat
    ginv = (d, -b, -c, a)
    if not x.fricke:
        return GroupElement.make(x.level, *ginv)
    # (g W)^-1 = W^-1 g^-1 = (W g^-1 W^-1) W up to sign
    return GroupElement.make(x.level, *_conj_by_fricke(ginv, x.level), fricke=True)


def trace_squared_times_e(x: GroupElement) -> tuple[int, int]:
    """(tr(M)^2, e) so that the real trace squared is tr(M)^2 / e."""
    M, e = x.scaled()
    return (M[0] + M[3]) ** 2, e


def is_parabolic(x: GroupElement) -> bool:
    if x.is_identity():
        raise IdentityInput("the identity is not classified")
    t2, e = trace_squared_times_e(x)
    return t2 == 4 * e


def random_element(N: int, rng: random.Random, length: int = 6) -> GroupElement:
    """Random word in T^{+-1}, (1,0;N,1)^{+-1} and W_N of the given length."""
    gens = [translation(N), translation(N, -1), lower(N), lower(N, -1), fricke(N)]
    g = identity(N)
    for _ in range(rng.randint(1, length)):
        g = multiply(g, rng.choice(gens))
    return g


def random_gamma0(N: int, rng: random.Random, bound: int = 20) -> GroupElement:
    """Random element of Gamma_0(N) with |c| <= bound * N."""
    while True:
        c = N * rng.randint(1, bound)
        d = rng.randint(-c, c)
        if math.gcd(c, d) == 1:
            break
    _, x, y = _egcd(d, c)
    # a d - b c = 1
    a, b = x, -y
    k = rng.randint(-3, 3)
    return GroupElement.make(N, a + k * c, b + k * d, c, d)


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, x, y) with a x + b y = g."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


# ---------------------------------------------------------------------------
# Real matrices of the form M / sqrt(e)
# ---------------------------------------------------------------------------


def _squarefree_part(n: int) -> tuple[int, int]:
    """n = k^2 * m with m squarefree; returns (k, m)."""
    k, m, p = 1, n, 2
    while p * p <= m:
        while m % (p * p) == 0:
            m //= p * p
            k *= p
        p += 1
    return k, m


@dataclass(frozen=True)
class ScaledMatrix:
    """Real 2x2 matrix M / sqrt(e), M rational, e squarefree."""

    m: tuple[Fraction, Fraction, Fraction, Fraction]
    e: int = 1

    @classmethod
    def of(cls, entries, e: int = 1) -> "ScaledMatrix":
        k, sf = _squarefree_part(e)
        return cls(tuple(Fraction(x) / k for x in entries), sf)

    @classmethod
    def from_element(cls, g: GroupElement) -> "ScaledMatrix":
        M, e = g.scaled()
        return cls.of(M, e)

    def __mul__(self, other: "ScaledMatrix") -> "ScaledMatrix":
        return ScaledMatrix.of(_mat_mul(self.m, other.m), self.e * other.e)

    def det(self) -> Fraction:
        a, b, c, d = self.m
        return (a * d - b * c) / self.e

    def inverse(self) -> "ScaledMatrix":
        a, b, c, d = self.m
        det = self.det()
        return ScaledMatrix.of((d / det, -b / det, -c / det, a / det), self.e)

    def real(self) -> np.ndarray:
        return np.array([float(x) for x in self.m]).reshape(2, 2) / math.sqrt(self.e)

    def act(self, z):
        a, b, c, d = (float(x) for x in self.m)
        return (a * z + b) / (c * z + d)

    def is_translation(self, by: int | None = None) -> bool:
        """True if +-(1, m; 0, 1) (with m == by when given)."""
        a, b, c, d = self.m
        if self.e != 1 or c != 0:
            return False
        if not (a == d and abs(a) == 1):
            return False
        return by is None or b / a == by

    def to_element(self, N: int) -> GroupElement | None:
        """The Gamma* element this matrix equals, or None if it is not in Gamma*."""
        a, b, c, d = self.m
        if self.det() != 1:
            return None
        if self.e == 1:
            if all(x.denominator == 1 for x in self.m) and c.numerator % N == 0:
                return GroupElement.make(N, int(a), int(b), int(c), int(d))
            return None
        if self.e != N:
            return None
        g = (-b, a / N, -d, c / N)
        if all(x.denominator == 1 for x in g) and int(g[2]) % N == 0:
            return GroupElement.make(N, *(int(x) for x in g), fricke=True)
        return None


def in_gamma_star(x: ScaledMatrix, N: int) -> bool:
    return x.to_element(N) is not None


# ---------------------------------------------------------------------------
# Cusps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CuspData:
    """Cusp of Gamma* with scaling matrix sigma = A diag(sqrt w, 1/sqrt w)."""

    level: int
    label: int
    representative: Fraction | None  # None is the cusp at infinity
    width: int
    base: tuple[int, int, int, int]  # A in SL2(Z), A(inf) = representative
    scaling: ScaledMatrix = field(compare=False)
    certificate: ScaledMatrix = field(compare=False)

    @property
    def is_infinity(self) -> bool:
        return self.representative is None

    def __repr__(self):
        rep = "oo" if self.representative is None else str(self.representative)
        return f"Cusp({rep}, width={self.width}, N={self.level})"


def _scaling(A, w: int) -> ScaledMatrix:
    a, b, c, d = A
    # A diag(sqrt w, 1/sqrt w) = (1/sqrt w) (a w, b; c w, d)
    return ScaledMatrix.of((a * w, b, c * w, d), w)


def _stabilizer_generator(A, w: int, N: int) -> ScaledMatrix:
    Am = ScaledMatrix.of(A)
    return Am * ScaledMatrix.of((1, w, 0, 1)) * Am.inverse()


def _make_cusp(N: int, label: int, v: int) -> CuspData:
    if v == N:
        A, rep, w = (1, 0, 0, 1), None, 1
    else:
        A, rep, w = (1, 0, v, 1), Fraction(1, v), N // v
    sigma = _scaling(A, w)
    gen = _stabilizer_generator(A, w, N)
    if not in_gamma_star(gen, N):
        raise AssertionError(f"stabilizer generator of cusp 1/{v} not in Gamma*")
    for p in prime_factors(w):
        if in_gamma_star(_stabilizer_generator(A, w // p, N), N):
            raise AssertionError(f"width {w} of cusp 1/{v} is not minimal")
    cert = sigma.inverse() * gen * sigma
    if not cert.is_translation(1):
        raise AssertionError(f"scaling matrix of cusp 1/{v} fails the stabilizer check")
    if rep is not None and Fraction(A[0], A[2]) != rep:
        raise AssertionError("sigma(oo) differs from the representative")
    return CuspData(N, label, rep, w, A, sigma, cert)


@lru_cache(maxsize=None)
def cusp_set(N: int) -> tuple[CuspData, ...]:
    """Inequivalent cusps of Gamma*, infinity first.

    For squarefree N the Gamma_0(N)-cusps are 1/v, v | N, and W_N swaps 1/v with
    1/(N/v); each pair is represented by the member with the larger v.
    """
    _check_level(N)
    reps = sorted({max(v, N // v) for v in divisors(N)}, reverse=True)
    return tuple(_make_cusp(N, i, v) for i, v in enumerate(reps))


def cusp_orbits_bruteforce(N: int) -> int:
    """Number of Gamma*-classes of cusps by union-find on P^1(Z/N).

    Gamma_0(N)\\SL2(Z)/Gamma_oo is the set of T-orbits on P^1(Z/N) (bottom
    rows), and W_N is applied to the cusp a/c of a lift.  Independent of the
    divisor description used by :func:`cusp_set`.
    """
    _check_level(N)
    points = []
    for c in range(N):
        for d in range(N):
            if math.gcd(math.gcd(c, d), N) == 1:
                points.append((c, d))

    def norm(c, d):
        c %= N
        d %= N
        best = None
        for u in range(1, N + 1):
            if math.gcd(u, N) == 1:
                cand = ((u * c) % N, (u * d) % N)
                best = cand if best is None or cand < best else best
        return best

    keys = sorted({norm(c, d) for c, d in points})
    parent = {k: k for k in keys}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    def union(p, q):
        parent[find(p)] = find(q)

    for c, d in keys:
        union((c, d), norm(c, c + d))
        cc, dd = _coprime_lift(c, d, N)
        _, x, y = _egcd(dd, cc)
        cusp = Fraction(x, cc) if cc else None  # lift (x, -y; cc, dd) sends oo to x/cc
        if cusp is None:
            image = Fraction(0)
        elif cusp == 0:
            image = None
        else:
            image = Fraction(-1) / (N * cusp)
        row = (0, 1) if image is None else _bottom_for_cusp(image.numerator, image.denominator)
        union((c, d), norm(*row))
    return len({find(k) for k in keys})


def _coprime_lift(c: int, d: int, N: int) -> tuple[int, int]:
    for i in range(N + 1):
        for j in range(N + 1):
            cc, dd = c + N * i, d + N * j
            if cc != 0 and math.gcd(cc, dd) == 1:
                return cc, dd
    raise AssertionError("no coprime lift")


def _bottom_for_cusp(p: int, q: int) -> tuple[int, int]:
    """Bottom row of some SL2(Z) matrix sending infinity to p/q."""
    g, x, y = _egcd(p, q)
    # p x + q y = 1: matrix (p, -y; q, x)
    return q, x


# ---------------------------------------------------------------------------
# Coset and double coset enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassRecord:
    """One double coset Gamma_oo \\ sigma_a^-1 Gamma* sigma_b / Gamma_oo.

    ``c_sq`` is the exact square of the lower-left entry, ``d_over_c`` and
    ``a_over_c`` are the exact ratios gamma_d / c and gamma_a / c reduced mod 1,
    and ``element`` is sigma_a gamma sigma_b^-1 in Gamma*.
    """

    c_sq: Fraction
    d_over_c: Fraction
    a_over_c: Fraction
    element: GroupElement

    @property
    def c(self) -> float:
        return math.sqrt(self.c_sq)


@dataclass(frozen=True)
class CosetRep:
    """Coset of Gamma_a \\ Gamma*; the d-value is one residue mod c."""

    element: GroupElement
    c: float
    d: float
    c_sq: Fraction
    d_over_c: Fraction | None


def _frac_mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


def _infinity_classes_for_c_sq(N: int, c_sq: Fraction) -> list[ClassRecord]:
    """Fast enumeration for a = b = infinity at a single c^2."""
    out: list[ClassRecord] = []
    if c_sq.denominator != 1:
        return out
    n = int(c_sq)
    r = math.isqrt(n)
    if r * r == n and r % N == 0 and r > 0:
        c = r
        for d in range(c):
            if math.gcd(d, c) != 1:
                continue
            a = pow(d, -1, c) if c > 1 else 0
            b = (a * d - 1) // c
            g = GroupElement.make(N, a, b, c, d)
            out.append(ClassRecord(c_sq, Fraction(d, c), Fraction(a, c), g))
    if N > 1 and n % N == 0:
        u2 = n // N
        u = math.isqrt(u2)
        if u * u == u2 and u > 0 and math.gcd(u, N) == 1:
            for cp in range(u):
                if math.gcd(cp, u) != 1:
                    continue
                beta = (-pow(N * cp, -1, u)) % u if u > 1 else 0
                alpha = (1 + beta * N * cp) // u
                g = GroupElement.make(N, alpha, beta, N * cp, u, True)
                out.append(
                    ClassRecord(c_sq, _frac_mod1(Fraction(-cp, u)), Fraction(beta, u), g)
                )
    out.sort(key=lambda r: r.d_over_c)
    return out


def _infinity_c_squares(N: int, c_max: float) -> list[int]:
    """All c^2 <= c_max^2 occurring as lower-left entries of Gamma*."""
    lim = c_max * c_max
    vals = set()
    m = 1
    while (N * m) ** 2 <= lim:
        vals.add((N * m) ** 2)
        m += 1
    if N > 1:
        u = 1
        while N * u * u <= lim:
            if math.gcd(u, N) == 1:
                vals.add(N * u * u)
            u += 1
    return sorted(vals)


def _generic_classes(a: CuspData, b: CuspData, c_max: float) -> list[ClassRecord]:
    """Brute-force double cosets for an arbitrary pair of cusps.

    With sigma = A D, D = diag(sqrt w, 1/sqrt w), an element gamma corresponds to
    X = A_a^-1 gamma A_b = (p, q; r, t) / sqrt(e); the lower-left entry of
    sigma_a^-1 gamma sigma_b is r sqrt(w_a w_b / e).  Double cosets are
    indexed by r, t mod r w_b and p mod r w_a subject to membership.
    """
    N = a.level
    wa, wb = a.width, b.width
    Aa, Ab = ScaledMatrix.of(a.base), ScaledMatrix.of(b.base)
    Ab_inv = Ab.inverse()
    out: list[ClassRecord] = []
    for e in ([1, N] if N > 1 else [1]):
        factor = Fraction(wa * wb, e)
        r = 1
        while r * r * factor <= c_max * c_max:
            for t in range(r * wb):
                for p in range(r * wa):
                    num = p * t - e
                    if num % r:
                        continue
                    q = num // r
                    X = ScaledMatrix.of((p, q, r, t), e)
                    gamma = (Aa * X * Ab_inv).to_element(N)
                    if gamma is None:
                        continue
                    out.append(
                        ClassRecord(
                            r * r * factor,
                            _frac_mod1(Fraction(t, r * wb)),
                            _frac_mod1(Fraction(p, r * wa)),
                            gamma,
                        )
                    )
            r += 1
    out.sort(key=lambda rec: (rec.c_sq, rec.d_over_c))
    return out


def class_table(a: CuspData, b: CuspData, c_max: float) -> list[ClassRecord]:
    """All double cosets with 0 < c <= c_max, ordered by c then d/c."""
    if a.is_infinity and b.is_infinity:
        out = []
        for n in _infinity_c_squares(a.level, c_max):
            out.extend(_infinity_classes_for_c_sq(a.level, Fraction(n)))
        return out
    return _generic_classes(a, b, c_max)


def class_counts(a: CuspData, b: CuspData, c_max: float) -> dict[Fraction, int]:
    """Number of double cosets for each c^2 with 0 < c <= c_max.

    At a = b = infinity the residues are counted directly (same coprimality
    conditions as the enumeration) without building elements.
    """
    if not (a.is_infinity and b.is_infinity):
        out: dict[Fraction, int] = {}
        for r in class_table(a, b, c_max):
            out[r.c_sq] = out.get(r.c_sq, 0) + 1
        return out
    N = a.level
    out = {}
    for n in _infinity_c_squares(N, c_max):
        total = 0
        r = math.isqrt(n)
        if r * r == n and r % N == 0:
            total += int(np.count_nonzero(np.gcd(np.arange(r), r) == 1))
        if N > 1 and n % N == 0:
            u = math.isqrt(n // N)
            if u * u * N == n and math.gcd(u, N) == 1:
                total += int(np.count_nonzero(np.gcd(np.arange(u), u) == 1))
        out[Fraction(n)] = total
    return out


def double_coset_reps(a: CuspData, b: CuspData, c: float | Fraction) -> list[GroupElement]:
    """Representatives sigma_a gamma sigma_b^-1 of the double cosets with gamma_c = c.

    ``c`` may be given exactly through its square (a Fraction) or as a float.
    Returns an empty list when c is not a lower-left entry.
    """
    return [r.element for r in double_coset_records(a, b, c)]


def double_coset_records(a: CuspData, b: CuspData, c) -> list[ClassRecord]:
    c_sq = c if isinstance(c, Fraction) else None
    if c_sq is None:
        cf = float(c)
        candidates = class_table(a, b, cf * (1 + 1e-12))
        return [r for r in candidates if abs(r.c - cf) <= 1e-9 * cf]
    if a.is_infinity and b.is_infinity:
        return _infinity_classes_for_c_sq(a.level, c_sq)
    return [r for r in _generic_classes(a, b, math.sqrt(c_sq) * (1 + 1e-12)) if r.c_sq == c_sq]


def coset_reps(a: CuspData, c_max: float) -> Iterator[CosetRep]:
    """Cosets Gamma_a \\ Gamma* with 0 <= c <= c_max, one residue d mod c each.

    The identity coset (c = 0) comes first when a is the cusp at infinity; the
    remaining cosets of a given c are obtained from the yielded ones by d -> d + k c.
    """
    N = a.level
    b = cusp_set(N)[0]
    if a.is_infinity:
        yield CosetRep(identity(N), 0.0, 1.0, Fraction(0), None)
    for rec in class_table(a, b, c_max):
        c = rec.c
        yield CosetRep(rec.element, c, float(rec.d_over_c) * c, rec.c_sq, rec.d_over_c)
