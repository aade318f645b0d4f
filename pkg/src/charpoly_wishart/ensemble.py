"""Sample covariance matrices ``H = A*A / n`` and stable characteristic-polynomial products.

Each sample ``index`` gets its own Philox stream keyed by ``seed``, with the
counter offset by ``index``.  A sample is therefore a pure function of
``(seed, index)``.  Nothing depends on worker count or call order.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO, Tuple

import numpy as np
import scipy.linalg
from scipy.linalg.blas import zherk

from .errors import EigensolverError
from .signlog import SignLog

__all__ = [
    "EntryDistribution",
    "EnsembleConfig",
    "SampleSpectrum",
    "sample_rng",
    "draw_matrix",
    "sample_spectrum",
    "char_poly_product",
    "log_char_polys",
    "mu4",
    "kappa4",
    "write_spectra_csv",
]

_KINDS = ("gaussian", "rademacher", "threepoint")
_MAX_INDEX = 2**63
_MAX_SEED = 2**64


@dataclass(frozen=True)
class EntryDistribution:
    """Common law of ``Re a`` and ``Im a`` (independent, symmetric, variance 1/2).

    ``threepoint`` puts mass ``q`` on each of ``+-(4q)**-0.5`` and ``1-2q`` on 0,
    which gives fourth moment ``1/(8q)``.
    """

    kind: str = "gaussian"
    q: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "threepoint":
            if self.q is None or not (0.0 < self.q <= 0.5):
                raise ValueError(f"threepoint requires q in (0, 1/2], got {self.q!r}")
        elif self.q is not None:
            raise ValueError(f"{self.kind} takes no parameter q")

    @classmethod
    def gaussian(cls) -> "EntryDistribution":
        return cls("gaussian")

    @classmethod
    def rademacher(cls) -> "EntryDistribution":
        return cls("rademacher")

    @classmethod
    def threepoint(cls, q: float) -> "EntryDistribution":
        return cls("threepoint", float(q))

    @classmethod
    def parse(cls, text: str) -> "EntryDistribution":
        """Parse ``gaussian``, ``rademacher`` or ``threepoint:q``."""
        name, _, arg = text.strip().lower().partition(":")
        if name == "threepoint":
            if not arg:
                raise ValueError("threepoint needs a parameter, e.g. threepoint:0.125")
            return cls.threepoint(float(arg))
        if arg:
            raise ValueError(f"{name} takes no parameter")
        return cls(name)

    def __str__(self) -> str:
        return f"threepoint:{self.q!r}" if self.kind == "threepoint" else self.kind

    def mu4(self) -> float:
        """Fourth moment of ``Re a``."""
        if self.kind == "gaussian":
            return 0.75
        if self.kind == "rademacher":
            return 0.25
        return 1.0 / (8.0 * self.q)

    def kappa4(self) -> float:
        return self.mu4() - 0.75

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Real draws of ``Re a`` (or ``Im a``) with the given shape."""
        if self.kind == "gaussian":
            return rng.standard_normal(shape) * math.sqrt(0.5)
        if self.kind == "rademacher":
            bits = rng.integers(0, 2, size=shape, dtype=np.int8)
            return (2.0 * bits - 1.0) * math.sqrt(0.5)
        u = rng.random(shape)
        a = 1.0 / math.sqrt(4.0 * self.q)
        out = np.zeros(shape)
        out[u < self.q] = a
        out[(u >= self.q) & (u < 2.0 * self.q)] = -a
        return out


def mu4(dist: EntryDistribution) -> float:
    return dist.mu4()


def kappa4(dist: EntryDistribution) -> float:
    return dist.kappa4()


@dataclass(frozen=True)
class EnsembleConfig:
    n: int
    m: int
    dist: EntryDistribution = field(default_factory=EntryDistribution)
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if int(self.m) != self.m or self.m < self.n:
            raise ValueError(f"m must be an integer with m >= n, got m={self.m!r}, n={self.n!r}")
        if not (0 <= int(self.seed) < _MAX_SEED):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    @property
    def c_mn(self) -> float:
        return self.m / self.n

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "dist": str(self.dist), "seed": int(self.seed)}

    def token(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SampleSpectrum:
    """Ascending eigenvalues of one draw of ``H``."""

    eigenvalues: np.ndarray
    config_hash: str
    index: int = 0

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """The generator owned by sample ``index``; streams never overlap."""
    if not (0 <= index < _MAX_INDEX):
        raise ValueError(f"sample index must be in [0, 2**63), got {index!r}")
    return np.random.Generator(np.random.Philox(key=int(seed), counter=int(index) << 128))


def draw_matrix(config: EnsembleConfig, index: int) -> np.ndarray:
    """The complex ``m x n`` matrix ``A`` of sample ``index`` (Fortran-ordered)."""
    rng = sample_rng(config.seed, index)
    re = config.dist.draw(rng, (config.n, config.m))
    im = config.dist.draw(rng, (config.n, config.m))
    x = np.empty((config.n, config.m), dtype=np.complex128)
    x.real = re
    x.imag = im
    return x.T


def _gram(a: np.ndarray, n: int) -> np.ndarray:
    # Upper triangle of A*A / n; the lower triangle is left unset.
    return zherk(1.0 / n, a, trans=2)


def sample_spectrum(config: EnsembleConfig, index: int) -> SampleSpectrum:
    """Eigenvalues of ``H = A*A / n`` for sample ``index``, ascending."""
    a = draw_matrix(config, index)
    h = _gram(a, config.n)
    try:
        eig = scipy.linalg.eigvalsh(h, lower=False, overwrite_a=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(
            f"hermitian eigensolve failed for n={config.n}, m={config.m}, "
            f"seed={config.seed}, index={index}: {exc}") from exc
    if not np.all(np.isfinite(eig)):
        raise EigensolverError(
            f"non-finite eigenvalues for n={config.n}, m={config.m}, seed={config.seed}, index={index}")
    tol = 1e-10 * max(float(eig[-1]), 0.0)
    if eig[0] < -tol:
        raise EigensolverError(
            f"spectrum not PSD (min {eig[0]:.3e}) for n={config.n}, m={config.m}, "
            f"seed={config.seed}, index={index}")
    return SampleSpectrum(eig, config.token(), index)


def log_char_polys(eigenvalues: np.ndarray, lambdas: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Per-lambda ``(sign, log|det(lambda - H)|)`` arrays."""
    lam = np.asarray(lambdas, dtype=float).reshape(-1, 1)
    diff = lam - np.asarray(eigenvalues, dtype=float).reshape(1, -1)
    neg = np.count_nonzero(diff < 0, axis=1)
    zero = np.any(diff == 0, axis=1)
    with np.errstate(divide="ignore"):
        logs = np.sum(np.log(np.abs(diff)), axis=1)
    signs = np.where(zero, 0, np.where(neg % 2 == 0, 1, -1))
    return signs, np.where(zero, -np.inf, logs)


def char_poly_product(spectrum, lambdas: Sequence[float]) -> SignLog:
    """``prod_j det(lambda_j - H)`` as a SignLog."""
    eig = spectrum.eigenvalues if isinstance(spectrum, SampleSpectrum) else np.asarray(spectrum)
    if len(eig) == 0:
        raise ValueError("empty spectrum")
    signs, logs = log_char_polys(eig, lambdas)
    s = int(np.prod(signs))
    if s == 0:
        return SignLog.zero()
    return SignLog(s, math.fsum(logs.tolist()))


def write_spectra_csv(spectra: Iterable[SampleSpectrum], out: TextIO) -> None:
    """Audit format: one row ``index,eig_1,...,eig_n`` per spectrum."""
    spectra = list(spectra)
    w = csv.writer(out, lineterminator="\n")
    n = spectra[0].n if spectra else 0
    w.writerow(["index"] + [f"eig_{i + 1}" for i in range(n)])
    for s in spectra:
        w.writerow([s.index] + [repr(float(x)) for x in s.eigenvalues])
