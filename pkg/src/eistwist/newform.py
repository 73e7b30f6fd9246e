"""The weight-2 newform f, its periods and the modular-symbol homomorphism psi.

The canonical instance is the level-37 newform attached to the rank-one curve
y^2 + y = x^3 - x; its Fourier coefficients are produced here by point
counting and the Hecke recursion, so no external tables are trusted.
"""

from __future__ import annotations

import hashlib
import json
import math
import pickle
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import EistwistError, TruncationInsufficient, UnsupportedPrime
from .group import GroupElement, _egcd, identity, is_squarefree
from .special import TWO_PI

CANONICAL_LEVEL = 37
TAIL_TOL = 1e-12


def primes_up_to(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve).tolist()


def ap_oracle(p: int) -> int:
    """a_p = p + 1 - #E(F_p) for E: y^2 + y = x^3 - x, by exhaustive counting."""
    if p == CANONICAL_LEVEL:
        raise UnsupportedPrime("37 is the bad prime; a_37 comes from the table")
    if p < 2 or any(p % q == 0 for q in range(2, math.isqrt(p) + 1)):
        raise UnsupportedPrime(f"{p} is not prime")
    x = np.arange(p, dtype=np.int64)
    rhs = (x * x % p * x - x) % p
    y = np.arange(p, dtype=np.int64)
    lhs = (y * y + y) % p
    # number of y with y^2 + y = r, tabulated over r
    count = np.bincount(lhs, minlength=p)
    affine = int(count[rhs].sum())
    return p + 1 - (affine + 1)


BAD_PRIME_TABLE = {CANONICAL_LEVEL: -1}


def _fill_multiplicative(ap: dict[int, int], n_max: int, level: int) -> np.ndarray:
    a = np.zeros(n_max + 1, dtype=np.int64)
    a[1] = 1
    for p, apv in ap.items():
        pk, prev, cur = p, 1, apv
        while pk <= n_max:
            a[pk] = cur
            if level % p == 0:
                nxt = apv * cur
            else:
                nxt = apv * cur - p * prev
            prev, cur = cur, nxt
            pk *= p
    # extend to composite n from the factorisation n = p^k * m
    spf = np.zeros(n_max + 1, dtype=np.int64)
    for p in sorted(ap):
        spf[p :: p][spf[p :: p] == 0] = p
    for n in range(2, n_max + 1):
        p = spf[n]
        pk = p
        while n % (pk * p) == 0:
            pk *= p
        m = n // pk
        if m > 1:
            a[n] = a[pk] * a[m]
    return a


@lru_cache(maxsize=8)
def canonical_coefficients(n_max: int) -> tuple[int, ...]:
    """a_1 .. a_{n_max} of the level-37 newform."""
    ap = {}
    for p in primes_up_to(max(n_max, 2)):
        ap[p] = BAD_PRIME_TABLE[p] if p in BAD_PRIME_TABLE else ap_oracle(p)
    a = _fill_multiplicative(ap, n_max, CANONICAL_LEVEL)
    return tuple(int(v) for v in a[1:])


@dataclass(frozen=True, eq=False)
class NewformData:
    """Weight-2 newform on Gamma_0(N) through its q-expansion coefficients."""

    level: int
    coefficients: np.ndarray  # a_1 .. a_{n_max}
    fricke_eigenvalue: int = 1
    degenerate: bool = False
    extender: Callable[[int], "NewformData"] | None = field(default=None, repr=False)

    def __post_init__(self):
        if not is_squarefree(self.level):
            raise ValueError(f"level {self.level} is not squarefree")
        coeffs = np.asarray(self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        coeffs.setflags(write=False)
        if self.degenerate:
            if np.any(coeffs != 0):
                raise ValueError("degenerate form must have zero coefficients")
            return
        if self.fricke_eigenvalue != 1:
            raise ValueError(
                "Fricke eigenvalue +1 is required: psi must extend to Gamma* and L_f(1)=0"
            )
        if coeffs.size == 0 or coeffs[0] != 1:
            raise ValueError("a_1 must equal 1")
        _check_hecke(coeffs, self.level)

    @property
    def n_max(self) -> int:
        return int(self.coefficients.size)

    @classmethod
    def canonical(cls, n_max: int = 2000) -> "NewformData":
        coeffs = np.array(canonical_coefficients(n_max), dtype=np.int64)
        return cls(CANONICAL_LEVEL, coeffs, 1, extender=_extend_canonical)

    @classmethod
    def zero(cls, level: int = 1, n_max: int = 16) -> "NewformData":
        """psi == 0 control: the zero 'form' on Gamma_0(level)."""
        return cls(level, np.zeros(n_max, dtype=np.int64), 1, degenerate=True)

    @classmethod
    def from_json(cls, path: str | Path) -> "NewformData":
        data = json.loads(Path(path).read_text())
        level = int(data["level"])
        coeffs = data["coefficients"]
        if level == CANONICAL_LEVEL:
            if not all(isinstance(x, int) for x in coeffs):
                raise ValueError("integer coefficients are required at level 37")
            ref = canonical_coefficients(len(coeffs))
            bad = [n + 1 for n, (x, y) in enumerate(zip(coeffs, ref)) if x != y]
            if bad:
                raise ValueError(f"coefficients disagree with point counting at n={bad[:5]}")
        return cls(level, np.array(coeffs), int(data["fricke_eigenvalue"]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "level": self.level,
                "fricke_eigenvalue": self.fricke_eigenvalue,
                "coefficients": [int(x) for x in self.coefficients],
            }
        )

    def ensure(self, n: int) -> "NewformData":
        """A version of this form carrying at least n coefficients."""
        if n <= self.n_max or self.degenerate:
            return self
        if self.extender is None:
            raise TruncationInsufficient(f"{n} coefficients needed, only {self.n_max} stored")
        return self.extender(n)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.level}:{self.fricke_eigenvalue}:{self.degenerate}".encode())
        h.update(np.ascontiguousarray(self.coefficients[:200], dtype=np.int64).tobytes())
        return h.hexdigest()[:16]


def _extend_canonical(n: int) -> NewformData:
    size = 1 << max(11, int(math.ceil(math.log2(n))))
    return NewformData.canonical(size)


def _check_hecke(a: np.ndarray, level: int) -> None:
    n_max = a.size
    lim = min(n_max, 3000)
    for p in primes_up_to(lim):
        pk = p * p
        prev2, prev = 1, int(a[p - 1])
        while pk <= lim:
            expected = prev * int(a[p - 1]) - (0 if level % p == 0 else p * prev2)
            if int(a[pk - 1]) != expected:
                raise ValueError(f"Hecke recursion fails at {p}^k = {pk}")
            prev2, prev = prev, int(a[pk - 1])
            pk *= p
    for m in range(2, min(lim, 60) + 1):
        for n in range(2, lim // m + 1):
            if math.gcd(m, n) == 1 and a[m * n - 1] != a[m - 1] * a[n - 1]:
                raise ValueError(f"multiplicativity fails at {m}*{n}")


# ---------------------------------------------------------------------------
# q-expansions
# ---------------------------------------------------------------------------


def _terms_for_height(y: float, weight_power: int, tol: float = TAIL_TOL) -> int:
    """Smallest M whose tail sum_{n>M} n^weight_power r^n (r = e^{-2 pi y}) is below tol."""
    r = math.exp(-TWO_PI * y)
    M = max(8, int(math.ceil(math.log(1.0 / tol) / (TWO_PI * y))))
    while _tail(r, M, weight_power) > tol:
        M = int(M * 1.25) + 1
    return M


def _tail(r: float, M: int, weight_power: int) -> float:
    if weight_power == 1:
        # sum_{n>M} n r^n
        return r ** (M + 1) * ((M + 1) - M * r) / (1.0 - r) ** 2
    return r ** (M + 1) / (1.0 - r)


def evaluate_f(nf: NewformData, z) -> complex | np.ndarray:
    """f(z) = sum a_n e^{2 pi i n z}; the tail is bounded with |a_n| <= n."""
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(zs.imag <= 0):
        raise ValueError("Im z must be positive")
    if nf.degenerate:
        out = np.zeros(zs.shape, dtype=complex)
        return complex(out[0]) if np.ndim(z) == 0 else out
    ymin = float(zs.imag.min())
    M = max(8, int(math.ceil(12.0 / (TWO_PI * ymin) * math.log(10.0))) + 10)
    if _tail(math.exp(-TWO_PI * ymin), min(M, nf.n_max), 1) > TAIL_TOL:
        M = _terms_for_height(ymin, 1)
    if M > nf.n_max:
        if nf.extender is None:
            raise TruncationInsufficient(f"height {ymin:g} needs {M} coefficients")
        nf = nf.ensure(M)
    out = _qsum(nf.coefficients[:M].astype(float), zs)
    return complex(out[0]) if np.ndim(z) == 0 else out


def _qsum(coef: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """sum_n coef[n-1] e^{2 pi i n z} for each z, reducing Re z mod 1 first."""
    n = np.arange(1, coef.size + 1)
    out = np.empty(zs.shape, dtype=complex)
    for i, z in enumerate(zs.flat):
        x = z.real - math.floor(z.real)
        terms = coef * np.exp(-TWO_PI * n * z.imag) * np.exp(2j * math.pi * ((n * x) % 1.0))
        out.flat[i] = terms.sum()
    return out


def period_to_infinity(nf: NewformData, z) -> complex | np.ndarray:
    """int_z^{i oo} f(w) dw = -(1/2 pi i) sum (a_n / n) e^{2 pi i n z}."""
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(zs.imag <= 0):
        raise ValueError("Im z must be positive")
    if nf.degenerate:
        out = np.zeros(zs.shape, dtype=complex)
        return complex(out[0]) if np.ndim(z) == 0 else out
    M = _terms_for_height(float(zs.imag.min()), 0, tol=TAIL_TOL * TWO_PI * 1e-2)
    nf = nf.ensure(M) if M > nf.n_max else nf
    coef = nf.coefficients[:M].astype(float) / np.arange(1, M + 1)
    out = _qsum(coef, zs) * (-1.0 / (2j * math.pi))
    return complex(out[0]) if np.ndim(z) == 0 else out


def l_value_at_1(nf: NewformData, split: float | None = None) -> complex:
    """L_f(1) = 2 pi int_0^oo f(iy) dy.

    The integral is split at ``split`` (default 1/sqrt N); the piece below is
    folded onto [1/(N split), oo) with f(i/(Ny)) = -w N y^2 f(iy), w the
    Fricke eigenvalue.  Both pieces are then exponentially convergent series.
    """
    if nf.degenerate:
        return 0j
    N = nf.level
    t = 1.0 / math.sqrt(N) if split is None else float(split)
    lo = min(t, 1.0 / (N * t))
    M = _terms_for_height(lo, 0, tol=1e-16)
    nf = nf.ensure(M) if M > nf.n_max else nf
    a = nf.coefficients[:M].astype(float)
    n = np.arange(1, M + 1)
    upper = np.sum(a / n * np.exp(-TWO_PI * n * t))
    lower = np.sum(a / n * np.exp(-TWO_PI * n / (N * t)))
    return complex(upper - nf.fricke_eigenvalue * lower)


# ---------------------------------------------------------------------------
# Modular symbols
# ---------------------------------------------------------------------------


def element_with_cusp(N: int, r: Fraction | None) -> GroupElement | None:
    """Some gamma in Gamma* with gamma(oo) = r, or None if r is not Gamma*-equivalent to oo."""
    if r is None:
        return identity(N)
    x, y = r.numerator, r.denominator
    if y % N == 0:
        g, u, v = _egcd(x, y)
        # x u + y v = 1: (x, -v; y, u)
        return GroupElement.make(N, x, -v, y, u)
    if math.gcd(y, N) != 1:
        return None
    # g = (alpha, x; N k, y) with alpha y - x N k = 1
    g, u, v = _egcd(y, x * N)
    return GroupElement.make(N, u, x, -v * N, y, True)


def _direct_symbol(nf: NewformData, gamma: GroupElement, z0: complex | None = None) -> complex:
    M, e = gamma.scaled()
    if M[2] == 0:
        return 0j
    if M[2] < 0:
        M = tuple(-v for v in M)
    cusp = Fraction(M[0], M[2])
    c_real = M[2] / math.sqrt(e)
    frac = cusp - math.floor(cusp)
    if z0 is None:
        z0 = complex(float(frac), 1.0 / c_real)
    shift = math.floor(cusp)
    # gamma^-1 z0 with the integer shift of z0 removed exactly
    w = z0 + shift
    zz = (M[3] * w - M[1]) / (-M[2] * w + M[0])
    zz = complex(zz.real - math.floor(zz.real), zz.imag)
    return complex(period_to_infinity(nf, zz) - period_to_infinity(nf, z0))


class PsiCache:
    """Memoised psi values keyed by the cusp gamma(oo) reduced mod 1.

    psi(gamma) = <f, gamma> depends only on gamma(oo), and is invariant under
    integer translations of it, so this key identifies psi exactly.  Reads
    are lock-free; insertions are serialised.
    """

    VERSION = 1

    def __init__(self, nf: NewformData, method: str = "auto"):
        self.nf = nf
        self.method = method
        self.values: dict[tuple[int, int], complex] = {}
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()
        self._manin: ManinTable | None = None

    @staticmethod
    def key(gamma: GroupElement) -> tuple[int, int]:
        r = gamma.cusp()
        if r is None:
            return (0, 0)
        return (r.numerator % r.denominator, r.denominator)

    def get(self, gamma: GroupElement) -> complex | None:
        v = self.values.get(self.key(gamma))
        if v is not None:
            self.hits += 1
        return v

    def put(self, gamma: GroupElement, value: complex) -> None:
        with self._lock:
            self.misses += 1
            self.values.setdefault(self.key(gamma), value)

    @property
    def manin(self) -> "ManinTable | None":
        if self._manin is None and self.method in ("auto", "manin"):
            self._manin = ManinTable.build(self.nf)
        return self._manin

    def save(self, path: str | Path) -> None:
        payload = pickle.dumps(
            {"fingerprint": self.nf.fingerprint(), "level": self.nf.level, "values": self.values}
        )
        digest = hashlib.sha256(payload).hexdigest().encode()
        header = b"EISTWIST-PSI %d " % self.VERSION + digest + b"\n"
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(header + payload)
        tmp.replace(path)

    def load(self, path: str | Path) -> bool:
        """Merge a saved cache; returns False (and loads nothing) on any mismatch."""
        path = Path(path)
        if not path.exists():
            return False
        raw = path.read_bytes()
        head, _, payload = raw.partition(b"\n")
        parts = head.split(b" ")
        if len(parts) != 3 or parts[0] != b"EISTWIST-PSI" or parts[1] != str(self.VERSION).encode():
            return False
        if hashlib.sha256(payload).hexdigest().encode() != parts[2]:
            return False
        try:
            data = pickle.loads(payload)
        except Exception:
            return False
        if data.get("fingerprint") != self.nf.fingerprint() or data.get("level") != self.nf.level:
            return False
        with self._lock:
            for k, v in data["values"].items():
                self.values.setdefault(k, v)
        return True


def modular_symbol(
    nf: NewformData,
    gamma: GroupElement,
    cache: PsiCache | None = None,
    z0: complex | None = None,
    method: str | None = None,
) -> complex:
    """psi(gamma) = int_{i oo}^{gamma i oo} f(z) dz.

    ``method`` is "direct" (base-point formula
    psi = P(gamma^-1 z0) - P(z0), P the period to infinity, z0 chosen so both
    heights equal 1/c) or "manin" (continued-fraction decomposition into a
    precomputed table of unimodular periods).  Passing ``z0`` forces the
    direct formula at that base point and bypasses the cache.
    """
    if gamma.level != nf.level:
        raise ValueError("element and newform have different levels")
    if nf.degenerate:
        return 0j
    if z0 is not None:
        return _direct_symbol(nf, gamma, z0)
    if cache is not None:
        hit = cache.get(gamma)
        if hit is not None:
            return hit
        method = method or cache.method
    method = method or "direct"
    value = None
    if method in ("auto", "manin"):
        table = cache.manin if cache is not None else ManinTable.build(nf)
        if table is not None:
            value = table.symbol(gamma.cusp())
        elif method == "manin":
            raise EistwistError("no Manin table at this level")
    if value is None:
        value = _direct_symbol(nf, gamma)
    if cache is not None:
        cache.put(gamma, value)
    return value


class ManinTable:
    """Unimodular periods int_{g 0}^{g oo} f indexed by Gamma_0(N) g in P^1(Z/N).

    Any cusp integral int_{i oo}^{p/q} f is a sum of such periods along the
    continued-fraction convergents of p/q.  Only available when every
    Gamma_0(N)-cusp is Gamma*-equivalent to infinity (N = 1 or prime).
    """

    def __init__(self, level: int, periods: dict[tuple[int, int], complex], norm: dict):
        self.level = level
        self.periods = periods
        self._norm = norm

    @classmethod
    def build(cls, nf: NewformData) -> "ManinTable | None":
        N = nf.level
        if N > 1 and any(N % p == 0 for p in range(2, N)):
            return None
        norm = {}
        for c in range(N):
            for d in range(N):
                if math.gcd(math.gcd(c, d), N) == 1:
                    norm[(c, d)] = min(
                        ((u * c) % N, (u * d) % N) for u in range(1, N + 1) if math.gcd(u, N) == 1
                    )
        periods = {}
        for c, d in set(norm.values()):
            cc, dd = c, d
            while math.gcd(cc, dd) != 1 or cc == 0 and dd != 1:
                if cc == 0:
                    cc, dd = N, d if N > 1 else 1
                    if math.gcd(cc, dd) != 1:
                        dd += N
                    continue
                dd += N
            g, x, y = _egcd(dd, cc)
            # h = (x, -y; cc, dd): h(oo) = x/cc, h(0) = -y/dd
            top = cls._direct_cusp(nf, Fraction(x, cc) if cc else None)
            bot = cls._direct_cusp(nf, Fraction(-y, dd) if dd else None)
            periods[(c, d)] = top - bot
        return cls(N, periods, norm)

    @staticmethod
    def _direct_cusp(nf: NewformData, r: Fraction | None) -> complex:
        g = element_with_cusp(nf.level, r)
        if g is None:
            raise EistwistError(f"cusp {r} is not Gamma*-equivalent to infinity")
        return _direct_symbol(nf, g)

    def period(self, c: int, d: int) -> complex:
        N = self.level
        return self.periods[self._norm[(c % N, d % N)]]

    def symbol(self, r: Fraction | None) -> complex:
        """int_{i oo}^{r} f."""
        if r is None:
            return 0j
        p, q = r.numerator, r.denominator
        p_prev, q_prev = 1, 0
        p_pp, q_pp = 0, 1
        total = 0j
        k = 0
        while True:
            a = p // q
            pk, qk = a * p_prev + p_pp, a * q_prev + q_pp
            sign = 1 if k % 2 else -1  # (-1)^(k-1)
            total += self.period(qk, sign * q_prev)
            p_pp, q_pp, p_prev, q_prev = p_prev, q_prev, pk, qk
            p, q = q, p - a * q
            k += 1
            if q == 0:
                break
        return total
