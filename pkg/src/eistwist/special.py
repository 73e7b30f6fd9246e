"""Complex special functions and double-exponential quadrature.

Everything here works in IEEE double precision.  Complex scalars are plain
Python ``complex`` values; array inputs are accepted where noted so that the
Eisenstein and Mellin layers can evaluate whole node sets at once.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np
from scipy import special as sp

from .errors import DomainError, MaxEvaluations, NonFinite, PoleError

PI = math.pi
TWO_PI = 2.0 * math.pi
SQRT_PI = math.sqrt(math.pi)

DEFAULT_BUDGET = 2**20


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    abs_error_estimate: float
    evaluations: int

    def __post_init__(self):
        if not (self.abs_error_estimate >= 0.0):
            raise ValueError("abs_error_estimate must be non-negative")
        if self.evaluations <= 0:
            raise ValueError("evaluations must be positive")


def check_finite(z: complex, what: str = "value") -> complex:
    """Return ``z`` as complex, raising NonFinite instead of storing NaN/inf."""
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise NonFinite(f"{what} is not finite: {z!r}")
    return z


def _is_nonpositive_integer(s: complex) -> bool:
    return s.imag == 0.0 and s.real <= 0.0 and s.real == math.floor(s.real)


def complex_gamma(s: complex) -> complex:
    """Gamma function for complex argument.

    >>> abs(complex_gamma(0.5) - math.sqrt(math.pi)) < 1e-15
    True
    """
    s = complex(s)
    if _is_nonpositive_integer(s):
        raise PoleError(f"Gamma has a pole at {s.real:g}")
    if s.imag == 0.0:
        # the real routine is correctly rounded; the complex one is not
        return check_finite(complex(sp.gamma(s.real)), "Gamma(s)")
    return check_finite(sp.gamma(s), "Gamma(s)")


def gamma_ratio_half(s: complex) -> complex:
    """Gamma(s - 1/2) / Gamma(s), evaluated through log-gamma to avoid overflow."""
    s = complex(s)
    if _is_nonpositive_integer(s - 0.5):
        raise PoleError(f"Gamma(s-1/2) has a pole at s={s!r}")
    if _is_nonpositive_integer(s):
        return 0j
    return check_finite(cmath.exp(sp.loggamma(s - 0.5) - sp.loggamma(s)), "Gamma ratio")


def zeta(s: complex) -> complex:
    """Riemann zeta on the whole plane (mpmath backend)."""
    s = complex(s)
    if s == 1:
        raise PoleError("zeta has a pole at s=1")
    return check_finite(complex(mpmath.zeta(mpmath.mpc(s.real, s.imag))), "zeta(s)")


def completed_zeta(s: complex) -> complex:
    """pi^(-s/2) Gamma(s/2) zeta(s), using its symmetry s <-> 1 - s for Re s < 1/2."""
    s = complex(s)
    if s == 0 or s == 1:
        raise PoleError("completed zeta has poles at 0 and 1")
    if s.real < 0.5:
        s = 1 - s
    m = mpmath.mpc(s.real, s.imag)
    return check_finite(complex(mpmath.pi ** (-m / 2) * mpmath.gamma(m / 2) * mpmath.zeta(m)), "completed zeta")


# ---------------------------------------------------------------------------
# K-Bessel via the cosh integral representation
# ---------------------------------------------------------------------------

_LOG_DROP = 44.0  # integrand truncated once it falls e^-44 below its peak
_MAX_BESSEL_NODES = 2**21


def _cutoff(xc: float, a: float, gstar: float, t: float, direction: float) -> float:
    """Walk from ``t`` until -xc cosh t + a t drops _LOG_DROP below ``gstar``."""

    def low(u):
        return -xc * math.cosh(u) + a * u < gstar - _LOG_DROP

    step = 1.0
    far = t
    while not low(far):
        far += direction * step
        step *= 1.5
    near = t
    for _ in range(50):
        mid = 0.5 * (near + far)
        if low(mid):
            far = mid
        else:
            near = mid
    return far


def bessel_k(nu: complex, x, rtol: float = 1e-14):
    """Modified Bessel function K_nu(x) for complex order and real x > 0.

    Uses K_nu(x) = 1/2 int_R exp(-x cosh t + nu t) dt, integrated by the
    trapezoidal rule along the horizontal line through the saddle point of
    the exponent, where the integrand decays double-exponentially and shows
    no cancellation.  ``x`` may be a scalar or an array.  The order is first
    mapped to the half-plane Re nu >= 0, so K_{-nu} == K_nu bit for bit.
    """
    nu = complex(nu)
    if nu.real < 0 or (nu.real == 0 and nu.imag < 0):
        nu = -nu
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(xs > 0)):
        raise DomainError("bessel_k requires x > 0")
    out = np.zeros(xs.shape, dtype=complex)
    for idx in range(xs.size):
        out.flat[idx] = _bessel_k_single(nu, float(xs.flat[idx]), rtol)
    return complex(out.flat[0]) if scalar else out


def _bessel_k_single(nu: complex, x: float, rtol: float) -> complex:
    a, b = nu.real, nu.imag
    beta = cmath.asinh(nu / x).imag
    # stay off Im t = pi/2, where the integrand stops decaying; the price is a
    # cancellation loss of at most e^3
    beta_max = 0.5 * math.pi - min(0.5 * math.pi, 3.0 / max(abs(b), 1e-300))
    beta = math.copysign(min(abs(beta), beta_max), beta)
    cb, sb = math.cos(beta), math.sin(beta)
    xc = x * cb
    tstar = math.asinh(a / xc) if a > 0 else 0.0
    # modulus of the integrand is exp(-xc cosh t + a t - b beta)
    gstar = -xc * math.cosh(tstar) + a * tstar
    logscale = gstar - b * beta
    if logscale < -800.0:
        return 0j
    t_lo = _cutoff(xc, a, gstar, tstar, -1.0)
    t_hi = _cutoff(xc, a, gstar, tstar, 1.0)
    span = t_hi - t_lo
    freq = x * abs(sb) * max(math.sinh(abs(t_lo)), math.sinh(abs(t_hi))) + abs(b) + 1.0
    n = max(16, int(math.ceil(span * freq / 2.0)))

    def integrand(t):
        re = -x * (np.cosh(t) * cb) + a * t - b * beta
        im = -x * (np.sinh(t) * sb) + b * t
        return 0.5 * np.exp(re - logscale + 1j * (im + a * beta))

    h = span / n
    vals = integrand(t_lo + h * np.arange(n + 1))
    total = vals.sum() - 0.5 * (vals[0] + vals[-1])
    mass = np.abs(vals).sum()
    prev = total * h
    cur = prev
    while n < _MAX_BESSEL_NODES:
        h *= 0.5
        vals = integrand(t_lo + h * (2 * np.arange(n) + 1))
        total = total + vals.sum()
        mass = mass + np.abs(vals).sum()
        n *= 2
        cur = total * h
        diff = abs(cur - prev)
        # second test is the roundoff floor set by cancellation in the sum
        if diff <= rtol * abs(cur) or diff <= 4e-16 * mass * h:
            break
        prev = cur
    return complex(cur * math.exp(logscale)) if logscale > -745.0 else 0j


def whittaker_w(s: complex, n: int, z: complex) -> complex:
    """W_s(nz) = 2 sqrt(|n| y) K_{s-1/2}(2 pi |n| y) exp(2 pi i n x)."""
    z = complex(z)
    if n == 0:
        raise DomainError("whittaker_w needs n != 0")
    if z.imag <= 0:
        raise DomainError("whittaker_w needs Im z > 0")
    an = abs(n)
    y = z.imag
    k = bessel_k(complex(s) - 0.5, TWO_PI * an * y)
    return 2.0 * math.sqrt(an * y) * k * cmath.exp(2j * math.pi * n * z.real)


# ---------------------------------------------------------------------------
# Double-exponential quadrature
# ---------------------------------------------------------------------------


def _de_nodes(a: float, b: float, t: np.ndarray):
    """Abscissae and weights (before the step factor) for the DE maps."""
    half_pi = 0.5 * math.pi
    u = half_pi * np.sinh(t)
    du = half_pi * np.cosh(t)
    if math.isinf(b):
        ex = np.exp(u)
        return a + ex, du * ex
    width = b - a
    frac = 1.0 / (1.0 + np.exp(-2.0 * u))
    w = width * du / (2.0 * np.cosh(u) ** 2)
    return a + width * frac, w


def integrate_de(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    target_abs_err: float,
    max_evaluations: int = DEFAULT_BUDGET,
    min_level: int = 3,
    target_rel_err: float = 0.0,
) -> QuadratureResult:
    """Integrate ``f`` over (a, b) with tanh-sinh (finite b) or exp-sinh (b = inf).

    ``f`` must be vectorised: it receives a 1-d array of abscissae and
    returns an array of real or complex values.  Levels are refined by
    halving the step; the error estimate is the change between successive
    levels.  With ``target_rel_err`` the refinement also stops once the
    estimate is below ``target_rel_err * |value|``.
    """
    a = float(a)
    b = float(b)
    if not b > a:
        raise DomainError("integrate_de needs b > a")
    tmax = 4.5 if math.isinf(b) else 4.0
    h = 0.5
    used = 0

    def eval_at(t):
        nonlocal used
        x, w = _de_nodes(a, b, t)
        keep = (x > a) & (x < b) & (w > 0) & np.isfinite(x)
        if not np.any(keep):
            return 0.0
        used += int(keep.sum())
        if used > max_evaluations:
            raise MaxEvaluations(f"quadrature budget of {max_evaluations} points exhausted")
        vals = np.asarray(f(x[keep]))
        if not np.all(np.isfinite(vals)):
            raise NonFinite("integrand returned a non-finite value")
        return np.sum(w[keep] * vals)

    k = int(round(tmax / h))
    total = eval_at(h * np.arange(-k, k + 1))
    estimate = total * h
    err = math.inf
    level = 1
    while True:
        h *= 0.5
        k = int(round(tmax / h))
        odd = h * np.arange(-k + 1, k, 2)
        total = total + eval_at(odd)
        new = total * h
        err = abs(new - estimate)
        estimate = new
        level += 1
        if level >= min_level and err <= max(target_abs_err, target_rel_err * abs(new)):
            break
        if used * 2 > max_evaluations:
            raise MaxEvaluations(
                f"target {target_abs_err:g} not reached; last change {err:g} after {used} points"
            )
    value = check_finite(estimate, "quadrature value")
    return QuadratureResult(value, float(err), max(used, 1))
