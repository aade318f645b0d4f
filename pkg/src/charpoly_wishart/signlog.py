"""Signed-log and log-polar scalars, plus an exact mergeable accumulator.

Determinants of ``lambda - H`` grow like ``exp(O(n))``, so every quantity that
multiplies many of them is carried as a logarithm of the magnitude together
with a sign (real case) or a phase (complex case).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np

__all__ = ["SignLog", "LogComplex", "SignLogAccumulator", "logsumexp_complex"]


@dataclass(frozen=True)
class SignLog:
    """The real number ``sign * exp(log_mag)``."""

    sign: int
    log_mag: float = -math.inf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign!r}")

    @classmethod
    def from_float(cls, x: float) -> "SignLog":
        if x == 0:
            return cls(0, -math.inf)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def zero(cls) -> "SignLog":
        return cls(0, -math.inf)

    def __mul__(self, other: "SignLog") -> "SignLog":
        s = self.sign * other.sign
        if s == 0:
            return SignLog.zero()
        return SignLog(s, self.log_mag + other.log_mag)

    def __truediv__(self, other: "SignLog") -> "SignLog":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignLog")
        if self.sign == 0:
            return SignLog.zero()
        return SignLog(self.sign * other.sign, self.log_mag - other.log_mag)

    def __neg__(self) -> "SignLog":
        return SignLog(-self.sign, self.log_mag)

    def __pow__(self, p: float) -> "SignLog":
        if self.sign == 0:
            return SignLog.zero()
        if self.sign < 0 and p != int(p):
            raise ValueError("non-integer power of a negative SignLog")
        sign = 1 if (self.sign > 0 or int(p) % 2 == 0) else -1
        return SignLog(sign, p * self.log_mag)

    def sqrt(self) -> "SignLog":
        if self.sign < 0:
            raise ValueError("square root of a negative SignLog")
        return self ** 0.5

    def scale(self, log_factor: float) -> "SignLog":
        """Multiply by ``exp(log_factor)``."""
        if self.sign == 0:
            return self
        return SignLog(self.sign, self.log_mag + log_factor)

    def value(self) -> float:
        """Plain float; overflows to +-inf for huge magnitudes."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log_mag)
        except OverflowError:
            return self.sign * math.inf

    def __float__(self) -> float:
        return self.value()

    def to_dict(self) -> dict:
        return {"sign": self.sign, "log_mag": self.log_mag if self.sign else None}


@dataclass(frozen=True)
class LogComplex:
    """The complex number ``exp(log_mag + 1j * phase)``; ``log_mag=-inf`` is zero."""

    log_mag: float
    phase: float = 0.0

    @classmethod
    def from_complex(cls, z: complex) -> "LogComplex":
        if z == 0:
            return cls(-math.inf, 0.0)
        return cls(math.log(abs(z)), cmath.phase(z))

    @classmethod
    def from_log(cls, logz: complex) -> "LogComplex":
        """From a complex logarithm, reducing the phase to (-pi, pi]."""
        ph = math.remainder(logz.imag, 2 * math.pi)
        if ph == -math.pi:
            ph = math.pi
        return cls(logz.real, ph)

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        return LogComplex.from_log(complex(self.log_mag + other.log_mag, self.phase + other.phase))

    def __truediv__(self, other: "LogComplex") -> "LogComplex":
        return LogComplex.from_log(complex(self.log_mag - other.log_mag, self.phase - other.phase))

    def scale(self, log_factor: float) -> "LogComplex":
        return LogComplex(self.log_mag + log_factor, self.phase)

    def sqrt(self) -> "LogComplex":
        return LogComplex(0.5 * self.log_mag, 0.5 * self.phase)

    def value(self) -> complex:
        if self.log_mag == -math.inf:
            return 0j
        return cmath.rect(math.exp(self.log_mag), self.phase)

    @property
    def real_signlog(self) -> SignLog:
        """Real part as a SignLog (the imaginary part is dropped)."""
        re = math.cos(self.phase)
        if re == 0 or self.log_mag == -math.inf:
            return SignLog.zero()
        return SignLog(1 if re > 0 else -1, self.log_mag + math.log(abs(re)))

    def __add__(self, other: "LogComplex") -> "LogComplex":
        return logsumexp_complex(np.array([complex(self.log_mag, self.phase),
                                           complex(other.log_mag, other.phase)]))


def logsumexp_complex(logs: np.ndarray) -> LogComplex:
    """``log(sum(exp(logs)))`` for complex logs, rescaled by the largest magnitude."""
    logs = np.asarray(logs, dtype=complex).ravel()
    if logs.size == 0:
        return LogComplex(-math.inf)
    mx = np.max(logs.real)
    if not np.isfinite(mx):
        return LogComplex(-math.inf)
    s = complex(np.sum(np.exp(logs - mx)))
    if s == 0:
        return LogComplex(-math.inf)
    return LogComplex.from_log(complex(mx + math.log(abs(s)), cmath.phase(s)))


def _grow(partials: List[float], x: float) -> None:
    # Shewchuk's exact partial-sum expansion (the algorithm behind math.fsum).
    i = 0
    for y in partials:
        if abs(x) < abs(y):
            x, y = y, x
        hi = x + y
        lo = y - (hi - x)
        if lo:
            partials[i] = lo
            i += 1
        x = hi
    partials[i:] = [x]


@dataclass
class SignLogAccumulator:
    """Running sum and sum of squares of SignLog values.

    Values are stored rescaled by ``exp(-max_log)`` where ``max_log`` is the
    largest log-magnitude seen.  The signed sum is kept as an exact
    floating-point expansion, so cancellation between huge terms does not
    destroy small ones.
    """

    max_log: float = -math.inf
    partials: List[float] = field(default_factory=list)
    sq_partials: List[float] = field(default_factory=list)
    count: int = 0

    def _rescale_to(self, new_max: float) -> None:
        if new_max <= self.max_log:
            return
        if self.max_log > -math.inf:
            f = math.exp(self.max_log - new_max)
            f2 = f * f
            self.partials = [p * f for p in self.partials if p * f != 0.0]
            self.sq_partials = [p * f2 for p in self.sq_partials if p * f2 != 0.0]
        self.max_log = new_max

    def add(self, value: SignLog) -> None:
        self.add_many(np.array([value.sign]), np.array([value.log_mag]))

    def add_many(self, signs: Sequence[int], log_mags: Sequence[float]) -> None:
        signs = np.asarray(signs, dtype=np.int64).ravel()
        log_mags = np.asarray(log_mags, dtype=float).ravel()
        if signs.shape != log_mags.shape:
            raise ValueError("signs and log_mags must have equal length")
        self.count += signs.size
        live = signs != 0
        if not np.any(live):
            return
        self._rescale_to(float(np.max(log_mags[live])))
        scaled = np.exp(log_mags[live] - self.max_log)
        for x in (signs[live] * scaled).tolist():
            _grow(self.partials, x)
        for x in (scaled * scaled).tolist():
            _grow(self.sq_partials, x)

    def merge(self, other: "SignLogAccumulator") -> "SignLogAccumulator":
        """Return the combined accumulator; neither input is modified."""
        out = SignLogAccumulator(self.max_log, list(self.partials), list(self.sq_partials), self.count)
        out.count += other.count
        if other.max_log == -math.inf:
            return out
        out._rescale_to(other.max_log)
        f = math.exp(other.max_log - out.max_log)
        for p in other.partials:
            _grow(out.partials, p * f)
        for p in other.sq_partials:
            _grow(out.sq_partials, p * f * f)
        return out

    def total(self) -> SignLog:
        s = math.fsum(self.partials)
        if s == 0 or self.max_log == -math.inf:
            return SignLog.zero()
        return SignLog(1 if s > 0 else -1, self.max_log + math.log(abs(s)))

    def mean(self) -> SignLog:
        if self.count == 0:
            raise ValueError("mean of an empty accumulator")
        return self.total().scale(-math.log(self.count))

    def second_moment(self) -> SignLog:
        """Mean of the squared values."""
        if self.count == 0:
            raise ValueError("second moment of an empty accumulator")
        s = math.fsum(self.sq_partials)
        if s == 0:
            return SignLog.zero()
        return SignLog(1, 2 * self.max_log + math.log(s) - math.log(self.count))

    def rel_stderr(self) -> float:
        """Standard error of the mean divided by ``|mean|``."""
        n = self.count
        mean = self.mean()
        if mean.sign == 0 or n < 2:
            return math.inf
        m = math.exp(mean.log_mag - self.max_log)
        m2 = math.fsum(self.sq_partials) / n
        var = max(m2 - m * m, 0.0) * n / (n - 1)
        return math.sqrt(var / n) / m


def accumulate(values: Iterable[SignLog]) -> SignLogAccumulator:
    acc = SignLogAccumulator()
    vals = list(values)
    if vals:
        acc.add_many([v.sign for v in vals], [v.log_mag for v in vals])
    return acc
