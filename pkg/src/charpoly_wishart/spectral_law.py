"""Marchenko-Pastur law, its scaling constants, and an empirical KS comparison."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

__all__ = [
    "MPLaw",
    "Regime",
    "ScalingPoint",
    "mp_density",
    "support_edges",
    "gamma_edge",
    "alpha_coeff",
    "scaled_lambdas",
    "mp_cdf",
    "mp_sample",
    "ks_distance",
    "DEFAULT_XI_WINDOW",
]

DEFAULT_XI_WINDOW = 5.0


@dataclass(frozen=True)
class MPLaw:
    c: float

    def __post_init__(self):
        if not (self.c >= 1.0 and math.isfinite(self.c)):
            raise ValueError(f"aspect ratio c must be finite and >= 1, got {self.c!r}")

    @property
    def lambda_minus(self) -> float:
        return (1.0 - math.sqrt(self.c)) ** 2

    @property
    def lambda_plus(self) -> float:
        return (1.0 + math.sqrt(self.c)) ** 2


class Regime(str, enum.Enum):
    BULK = "bulk"
    EDGE_PLUS = "edge+"
    EDGE_MINUS = "edge-"

    @property
    def is_edge(self) -> bool:
        return self is not Regime.BULK

    @property
    def edge_sign(self) -> int:
        return {Regime.EDGE_PLUS: 1, Regime.EDGE_MINUS: -1}.get(self, 0)


def support_edges(law: MPLaw) -> Tuple[float, float]:
    """``(lambda_-, lambda_+)``."""
    return law.lambda_minus, law.lambda_plus


def mp_density(law: MPLaw, lam):
    """Marchenko-Pastur density; zero outside the open support (and at its endpoints)."""
    lo, hi = support_edges(law)
    x = np.asarray(lam, dtype=float)
    inside = (x > lo) & (x < hi)
    xs = np.where(inside, x, 0.5 * (lo + hi))
    val = np.sqrt(np.maximum((hi - xs) * (xs - lo), 0.0)) / (2.0 * math.pi * xs)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def gamma_edge(law: MPLaw, sign: int) -> float:
    """Edge scale ``c**(1/4) / (1 +- sqrt c)**2``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if sign < 0 and law.c == 1.0:
        raise ValueError("the lower edge is degenerate at c = 1 (lambda_- = 0)")
    return law.c ** 0.25 / (1.0 + sign * math.sqrt(law.c)) ** 2


@dataclass(frozen=True)
class ScalingPoint:
    """A spectral location with its regime and local scaling constants."""

    lambda0: float
    regime: Regime
    c: float
    rho0: Optional[float] = None
    gamma: Optional[float] = None
    alpha0: float = 0.0

    @classmethod
    def bulk(cls, law: MPLaw, lambda0: float) -> "ScalingPoint":
        lo, hi = support_edges(law)
        if not (lo < lambda0 < hi):
            raise ValueError(f"bulk point lambda0={lambda0} is not inside ({lo:.6g}, {hi:.6g})")
        rho = mp_density(law, lambda0)
        if rho <= 0:
            raise ValueError(f"density vanishes at lambda0={lambda0}")
        alpha = (lambda0 - law.c + 1.0) / (2.0 * lambda0 * rho)
        return cls(float(lambda0), Regime.BULK, law.c, rho0=rho, alpha0=alpha)

    @classmethod
    def edge(cls, law: MPLaw, sign: int) -> "ScalingPoint":
        g = gamma_edge(law, sign)
        lam = law.lambda_plus if sign > 0 else law.lambda_minus
        alpha = g ** (-2.0 / 3.0) / (1.0 + sign * math.sqrt(law.c))
        regime = Regime.EDGE_PLUS if sign > 0 else Regime.EDGE_MINUS
        return cls(lam, regime, law.c, gamma=g, alpha0=alpha)

    @classmethod
    def make(cls, law: MPLaw, regime: Union[str, Regime], lambda0: Optional[float] = None) -> "ScalingPoint":
        """Build from a regime name: ``bulk`` needs ``lambda0``; ``edge``/``edge+``/``edge-`` do not."""
        r = str(regime.value if isinstance(regime, Regime) else regime).lower()
        if r == "bulk":
            if lambda0 is None:
                raise ValueError("bulk regime needs lambda0")
            return cls.bulk(law, lambda0)
        if r in ("edge", "edge+"):
            return cls.edge(law, 1)
        if r == "edge-":
            return cls.edge(law, -1)
        raise ValueError(f"unknown regime {regime!r}")

    @property
    def law(self) -> MPLaw:
        return MPLaw(self.c)

    def local_scale(self, n: int) -> float:
        """Spacing unit: ``1/(n rho)`` in the bulk, ``(n gamma)**(-2/3)`` at an edge."""
        if self.regime is Regime.BULK:
            return 1.0 / (n * self.rho0)
        return (n * self.gamma) ** (-2.0 / 3.0)

    def to_dict(self) -> dict:
        return {"lambda0": self.lambda0, "regime": self.regime.value, "c": self.c,
                "rho0": self.rho0, "gamma": self.gamma, "alpha0": self.alpha0}


def alpha_coeff(point: ScalingPoint, law: Optional[MPLaw] = None) -> float:
    if law is not None and law.c != point.c:
        raise ValueError(f"point built for c={point.c}, law has c={law.c}")
    return point.alpha0


def scaled_lambdas(point: ScalingPoint, n: int, xis: Sequence[float]) -> np.ndarray:
    """``lambda0 + xi * local_scale(n)`` for each xi."""
    return point.lambda0 + np.asarray(xis, dtype=float) * point.local_scale(n)


def _theta(law: MPLaw, x):
    lo, hi = support_edges(law)
    t = np.clip((np.asarray(x, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
    return np.arcsin(np.sqrt(t))


def _theta_integrand(law: MPLaw, th):
    # rho(lambda) d lambda after lambda = lo + (hi - lo) sin^2 theta; smooth in theta.
    lo, hi = support_edges(law)
    w = hi - lo
    s2 = np.sin(th) ** 2
    return w * w * s2 * (1.0 - s2) / (math.pi * (lo + w * s2))


def mp_cdf(law: MPLaw, x, epsabs: float = 1e-12):
    """Marchenko-Pastur CDF by adaptive quadrature in the angle variable."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    order = np.argsort(xs)
    th = _theta(law, xs[order])
    out = np.empty_like(xs)
    acc, prev = 0.0, 0.0
    for i, t in zip(order, th):
        if t > prev:
            piece, _ = integrate.quad(lambda u: _theta_integrand(law, u), prev, t,
                                      epsabs=epsabs, epsrel=1e-13, limit=200)
            acc += piece
            prev = t
        out[i] = min(acc, 1.0)
    return float(out[0]) if np.ndim(x) == 0 else out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def mp_sample(law: MPLaw, size: int, rng: np.random.Generator, grid: int = 4096) -> np.ndarray:
    """Draws from the MP law by inverting its CDF (grid inverse plus Newton polish)."""
    th_grid = np.linspace(0.0, 0.5 * math.pi, grid + 1)
    lo, hi = support_edges(law)
    cdf = mp_cdf(law, lo + (hi - lo) * np.sin(th_grid) ** 2)
    cdf[-1] = 1.0
    u = rng.random(size)
    th = np.interp(u, cdf, th_grid)
    for _ in range(3):
        idx = np.clip(np.searchsorted(th_grid, th) - 1, 0, grid - 1)
        base = cdf[idx]
        a = th_grid[idx]
        half = 0.5 * (th - a)
        nodes = (a + half)[:, None] + half[:, None] * _GL_X[None, :]
        fine = half * (_theta_integrand(law, nodes) @ _GL_W)
        dens = _theta_integrand(law, th)
        step = np.where(dens > 1e-14, (base + fine - u) / np.maximum(dens, 1e-14), 0.0)
        th = np.clip(th - step, 0.0, 0.5 * math.pi)
    return lo + (hi - lo) * np.sin(th) ** 2


def _pooled(spectra) -> np.ndarray:
    if isinstance(spectra, np.ndarray):
        return np.sort(spectra.ravel())
    parts = [np.asarray(getattr(s, "eigenvalues", s), dtype=float).ravel() for s in spectra]
    if not parts:
        raise ValueError("need at least one spectrum")
    return np.sort(np.concatenate(parts))


def ks_distance(spectra: Union[Iterable, np.ndarray], reference: Union[MPLaw, Iterable, np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance of the pooled empirical CDF from ``reference``.

    ``reference`` is an MPLaw or another pooled sample (two-sample statistic).
    """
    x = _pooled(spectra)
    n = x.size
    if n == 0:
        raise ValueError("need at least one eigenvalue")
    if isinstance(reference, MPLaw):
        f = mp_cdf(reference, x)
        i = np.arange(1, n + 1)
        return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    y = _pooled(reference)
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / n
    fy = np.searchsorted(y, grid, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))
