"""Sine and Airy kernels, the Airy function, and small determinant identities.

The Airy function is evaluated by its Maclaurin series on ``[-8, 8]`` and by the
standard large-argument expansions outside.  The series is summed in
fixed-point integer arithmetic: for negative ``x`` the two series branches
cancel by up to six orders of magnitude, and a finite-difference ODE check
would see that rounding noise amplified by ``1/h**2``.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple

import numpy as np
from scipy import integrate

from .errors import AiryRangeError, ConditioningError

__all__ = [
    "SINC_SWITCH",
    "AIRY_DIAG_SWITCH",
    "AIRY_RANGE",
    "sine_kernel",
    "airy",
    "airy_prime",
    "airy_pair",
    "airy_quadrature",
    "airy_kernel",
    "KernelMatrix",
    "kernel_matrix",
    "vandermonde",
    "cauchy_det_check",
    "s2_elementary",
]

SINC_SWITCH = 1e-4
AIRY_DIAG_SWITCH = 1e-4
AIRY_RANGE = (-20.0, 10.0)
SERIES_RANGE = (-8.0, 8.0)

# ---------------------------------------------------------------- sine kernel


def sine_kernel(x: float, y: float) -> float:
    """``sin(pi (x - y)) / (pi (x - y))`` with an even Taylor series near the diagonal."""
    t = math.pi * (x - y)
    if abs(x - y) < SINC_SWITCH:
        t2 = t * t
        return 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0))
    return math.sin(t) / t


# ---------------------------------------------------------------- Airy function

_BITS = 256
_ONE = 1 << _BITS
# 3**(-2/3)/Gamma(2/3) and 3**(-1/3)/Gamma(1/3), i.e. Ai(0) and -Ai'(0).
_C1 = Fraction("0.35502805388781723926006318600418317639797917419917724058332651030081")
_C2 = Fraction("0.2588194037928067984051835601892039634790911383549345822100018138561028")
_C1_FIX = (_C1.numerator << _BITS) // _C1.denominator
_C2_FIX = (_C2.numerator << _BITS) // _C2.denominator


def _series_fixed(x: float) -> Tuple[Fraction, Fraction]:
    """Ai and Ai' by the Maclaurin series, exact up to ~2**-250 absolute."""
    num, den = float(x).as_integer_ratio()
    n3, d3 = num ** 3, den ** 3

    def run(first_num: int, first_den: int, denom) -> int:
        term = (first_num << _BITS) // first_den
        total = term
        k = 1
        while term:
            prod = term * n3
            q = abs(prod) // (d3 * denom(k))  # truncate toward zero
            term = q if prod > 0 else -q
            total += term
            k += 1
        return total

    f = run(1, 1, lambda k: (3 * k - 1) * 3 * k)
    g = run(num, den, lambda k: 3 * k * (3 * k + 1))
    fp = run(num * num, 2 * den * den, lambda k: (3 * k + 2) * 3 * k) if num else 0
    gp = run(1, 1, lambda k: 3 * k * (3 * k - 2))
    ai = _C1_FIX * f - _C2_FIX * g
    aip = _C1_FIX * fp - _C2_FIX * gp
    scale = _ONE * _ONE
    return Fraction(ai, scale), Fraction(aip, scale)


def _asym_coeffs(kmax: int):
    u = [1.0]
    for k in range(1, kmax + 1):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    v = [1.0] + [-(6 * k + 1) / (6 * k - 1) * u[k] for k in range(1, kmax + 1)]
    return u, v


_U, _V = _asym_coeffs(40)


def _asym_sums(zeta: float, coeffs, alternating: bool):
    """Return the list of terms ``(+-1)^k c_k / zeta^k`` down to relative 1e-18."""
    out = []
    p = 1.0
    for k, c in enumerate(coeffs):
        t = c * p * (-1.0 if (alternating and k % 2) else 1.0)
        out.append(t)
        if k > 0 and abs(t) < 1e-18:
            break
        if k > 0 and abs(t) > abs(out[-2]):
            out.pop()  # past the smallest term
            break
        p /= zeta
    return out


def _airy_asym_pos(x: float) -> Tuple[float, float]:
    zeta = 2.0 / 3.0 * x * math.sqrt(x)
    pre = math.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    su = math.fsum(_asym_sums(zeta, _U, True))
    sv = math.fsum(_asym_sums(zeta, _V, True))
    q = x ** 0.25
    return pre / q * su, -pre * q * sv


def _airy_asym_neg(x: float) -> Tuple[float, float]:
    z = -x
    zeta = 2.0 / 3.0 * z * math.sqrt(z)
    tu = _asym_sums(zeta, _U, False)
    tv = _asym_sums(zeta, _V, False)
    # even/odd split with alternating signs (-1)^j on u_{2j}, u_{2j+1}
    ue = math.fsum(t * (-1) ** (k // 2) for k, t in enumerate(tu) if k % 2 == 0)
    uo = math.fsum(t * (-1) ** (k // 2) for k, t in enumerate(tu) if k % 2 == 1)
    ve = math.fsum(t * (-1) ** (k // 2) for k, t in enumerate(tv) if k % 2 == 0)
    vo = math.fsum(t * (-1) ** (k // 2) for k, t in enumerate(tv) if k % 2 == 1)
    ph = zeta - 0.25 * math.pi
    c, s = math.cos(ph), math.sin(ph)
    q = z ** 0.25
    rp = 1.0 / math.sqrt(math.pi)
    return rp / q * (c * ue + s * uo), rp * q * (s * ve - c * vo)


def _check_range(x: float) -> float:
    x = float(x)
    if not (AIRY_RANGE[0] <= x <= AIRY_RANGE[1]):
        raise AiryRangeError(f"Airy argument {x} outside the supported range {AIRY_RANGE}")
    return x


def airy_pair(x: float) -> Tuple[float, float]:
    """``(Ai(x), Ai'(x))`` for ``x`` in ``AIRY_RANGE``."""
    x = _check_range(x)
    if x < SERIES_RANGE[0]:
        return _airy_asym_neg(x)
    if x > SERIES_RANGE[1]:
        return _airy_asym_pos(x)
    ai, aip = _series_fixed(x)
    return float(ai), float(aip)


def airy(x: float) -> float:
    return airy_pair(x)[0]


def airy_prime(x: float) -> float:
    return airy_pair(x)[1]


_RAY = cmath.exp(1j * math.pi / 6)


def airy_quadrature(x: float) -> Tuple[float, float]:
    """Independent route: the oscillatory Airy integral rotated onto the ray ``arg t = pi/6``.

    Rotating ``int_0^inf cos(t^3/3 + x t) dt`` onto that ray (and its mirror
    ``5 pi / 6`` for the conjugate half) turns the oscillation into decay
    ``exp(-s^3/3)``.
    """
    x = float(x)

    def phase(s):
        return cmath.exp(-s ** 3 / 3.0 + 1j * x * s * _RAY)

    # integrand magnitude exp(-s^3/3 - x s/2); cut off where it is below 1e-30 of its peak
    peak = math.sqrt(max(-x / 2.0, 0.0))
    top = peak + 8.0 + (3.0 * 70.0) ** (1.0 / 3.0)
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=1000)
    with warnings.catch_warnings():
        # quad reports roundoff once it is at the double-precision floor
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        ai = integrate.quad(lambda s: (_RAY * phase(s)).real, 0.0, top, **opts)[0]
        aip = integrate.quad(lambda s: (1j * _RAY * _RAY * s * phase(s)).real, 0.0, top, **opts)[0]
    return ai / math.pi, aip / math.pi


def airy_kernel(x: float, y: float) -> float:
    """Airy kernel ``(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y)``; diagonal ``Ai'(x)^2 - x Ai(x)^2``.

    This is the positive-definite normalization (positive diagonal).  Near the
    diagonal the second-order expansion about the midpoint is used.
    """
    if abs(x - y) < AIRY_DIAG_SWITCH:
        s = 0.5 * (x + y)
        h = 0.5 * (x - y)
        a, b = airy_pair(s)
        return (b * b - s * a * a) + h * h * (a * b + 2.0 * s * b * b - 2.0 * s * s * a * a) / 3.0
    ax, bx = airy_pair(x)
    ay, by = airy_pair(y)
    return (ax * by - bx * ay) / (x - y)


# ---------------------------------------------------------------- kernel matrices


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ("sine", "airy"):
            raise ValueError(f"kind must be 'sine' or 'airy', got {self.kind!r}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("kernel matrix has non-finite entries")

    def det(self) -> float:
        return float(np.linalg.det(self.entries)) if self.entries.size else 1.0


def kernel_matrix(kind: str, rows: Sequence[float], cols: Sequence[float]) -> KernelMatrix:
    """``[K(rows[i], cols[j])]`` for the sine or Airy kernel."""
    if kind not in ("sine", "airy"):
        raise ValueError(f"kind must be 'sine' or 'airy', got {kind!r}")
    f = {"sine": sine_kernel, "airy": airy_kernel}[kind]
    ent = np.array([[f(r, c) for c in cols] for r in rows], dtype=float).reshape(len(rows), len(cols))
    return KernelMatrix(ent, kind)


# ---------------------------------------------------------------- determinant identities


def vandermonde(values: Sequence) -> complex:
    """``prod_{i<j} (v_j - v_i)``: later entry minus earlier entry.

    Returns a float for real input and a complex for complex input.
    """
    v = np.asarray(values)
    if v.size < 2:
        return v.dtype.type(1) if v.size else 1.0
    i, j = np.triu_indices(v.size, 1)
    out = np.prod(v[j] - v[i])
    return complex(out) if np.iscomplexobj(out) else float(out)


def cauchy_det_check(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """Both sides of the Cauchy determinant identity for ``[1/(a_j - b_l)]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    k = a.size
    if b.size != k or k == 0:
        raise ValueError("a and b must be non-empty and of equal length")
    diff = a[:, None] - b[None, :]
    if np.any(diff == 0):
        raise ConditioningError("some a_j coincides with some b_l")
    if len(set(a.tolist())) < k or len(set(b.tolist())) < k:
        raise ConditioningError("a's and b's must each be distinct")
    lhs = float(np.linalg.det(1.0 / diff))
    i, j = np.triu_indices(k, 1)
    num = np.prod(a[i] - a[j]) * np.prod(b[i] - b[j])
    rhs = (-1) ** (k * (k - 1) // 2) * float(num / np.prod(diff))
    return lhs, rhs


def s2_elementary(diag: Sequence, x0):
    """Half the second derivative of ``prod_l (x - d_l)`` at ``x0``.

    Equals the elementary symmetric polynomial of degree ``N - 2`` in
    ``x0 - d_l``, i.e. the sum over pairs ``i < j`` of the product of the
    remaining factors.
    """
    y = np.asarray(x0, dtype=complex if np.iscomplexobj(diag) or isinstance(x0, complex) else float) \
        - np.asarray(diag)
    if y.shape[-1] < 2:
        raise ValueError("diag needs at least two entries")
    n = y.shape[-1]
    e = [np.ones(y.shape[:-1], dtype=y.dtype)] + [np.zeros(y.shape[:-1], dtype=y.dtype)] * (n - 2)
    # e[k] holds e_k; only degrees up to n - 2 are needed
    for l in range(n):
        yl = y[..., l]
        for k in range(min(l + 1, n - 2), 0, -1):
            e[k] = e[k] + yl * e[k - 1]
    out = e[n - 2]
    return out.item() if np.ndim(out) == 0 else out
