"""Closed-form limits for correlations of characteristic polynomials.

The bulk and edge limits share one shape::

    c^{k(k-1)/2} * E(kappa4) * det[K(xi_i, xi_{k+j})] / (V(xi_1..xi_k) V(xi_{k+1}..xi_{2k}))

where ``K`` is the sine or Airy kernel and ``V`` the Vandermonde product.
The first-order finite-n formulas for ``F_2`` (bulk and soft edge) are also
provided; their self-normalized ratio collapses to a kernel ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConditioningError
from .signlog import SignLog
from .spectral_law import MPLaw, Regime, ScalingPoint, gamma_edge
from .special_fn import airy_kernel, kernel_matrix, sine_kernel, vandermonde

__all__ = [
    "LimitQuery",
    "BLOCK_GAP_MIN",
    "limit_factors",
    "bulk_limit_rhs",
    "edge_limit_rhs",
    "kosters_f2_bulk",
    "kosters_f2_edge",
    "normalized_ratio_prediction",
]

BLOCK_GAP_MIN = 1e-6


@dataclass(frozen=True)
class LimitQuery:
    """``xis[:k]`` is the row block and ``xis[k:]`` the column block."""

    k: int
    xis: tuple
    law: MPLaw
    point: ScalingPoint
    kappa4: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "xis", tuple(float(x) for x in self.xis))
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.xis) != 2 * self.k:
            raise ValueError(f"need 2k = {2 * self.k} xis, got {len(self.xis)}")
        if self.point.c != self.law.c:
            raise ValueError("scaling point and law disagree on c")
        if self.point.regime.is_edge and not self.law.c > 1.0:
            raise ValueError("edge limits require c > 1")

    @property
    def blocks(self):
        return self.xis[: self.k], self.xis[self.k:]


def _check_blocks(q: LimitQuery) -> None:
    for blk in q.blocks:
        b = np.sort(np.asarray(blk))
        if b.size > 1 and np.min(np.diff(b)) < BLOCK_GAP_MIN:
            raise ConditioningError(
                f"xi values within a block are closer than {BLOCK_GAP_MIN:g}; "
                "separate the points (the Vandermonde denominator is ill-conditioned)")


def limit_factors(q: LimitQuery) -> dict:
    """The separate factors of the bulk or edge limit and their product ``rhs``."""
    _check_blocks(q)
    k, c = q.k, q.law.c
    if q.point.regime is Regime.BULK:
        kind = "sine"
        log_kap = k * (k - 1) * q.kappa4 * (c - q.point.lambda0 + 1.0) ** 2 / c
    else:
        kind = "airy"
        log_kap = 4.0 * k * (k - 1) * q.kappa4
    rows, cols = q.blocks
    kdet = kernel_matrix(kind, rows, cols).det()
    v1, v2 = vandermonde(rows), vandermonde(cols)
    power_c = c ** (k * (k - 1) / 2.0)
    kap = math.exp(log_kap)
    return {
        "power_of_c": power_c,
        "kappa4_factor": kap,
        "kernel_det": kdet,
        "vandermondes": [v1, v2],
        "rhs": power_c * kap * kdet / (v1 * v2),
    }


def bulk_limit_rhs(q: LimitQuery) -> float:
    if q.point.regime is not Regime.BULK:
        raise ValueError("bulk_limit_rhs needs a bulk scaling point")
    return limit_factors(q)["rhs"]


def edge_limit_rhs(q: LimitQuery) -> float:
    if not q.point.regime.is_edge:
        raise ValueError("edge_limit_rhs needs an edge scaling point")
    return limit_factors(q)["rhs"]


def _signlog(log_abs: float, factor: float) -> SignLog:
    if factor == 0:
        return SignLog.zero()
    return SignLog(1 if factor > 0 else -1, log_abs + math.log(abs(factor)))


def kosters_f2_bulk(n: int, m: int, point: ScalingPoint, xi1: float, xi2: float,
                    kappa4: float = 0.0) -> SignLog:
    """First-order bulk approximation of ``F_2`` at the scaled points of ``xi1, xi2``."""
    if point.regime is not Regime.BULK:
        raise ValueError("bulk formula needs a bulk scaling point")
    cmn = m / n
    if abs(cmn - point.c) > 0.1 * point.c:
        raise ValueError(f"m/n = {cmn:g} is not within 10% of c = {point.c:g}")
    lam = point.lambda0
    log_abs = (math.log(n * point.rho0) + math.log(2.0 * math.pi) + (n - m) * math.log(lam)
               + (m + 0.5) * math.log(cmn) - n - m + n * lam
               + point.alpha0 * (xi1 + xi2) + 2.0 * kappa4)
    return _signlog(log_abs, sine_kernel(xi1, xi2))


def kosters_f2_edge(n: int, m: int, sign: int, xi1: float, xi2: float, kappa4: float = 0.0,
                    c: Optional[float] = None) -> SignLog:
    """First-order soft-edge approximation of ``F_2``; ``c`` defaults to ``m/n``.

    The exponential factor is ``exp(+-2 n sqrt(c))`` for the upper / lower edge,
    which is the bulk factor ``exp(n lambda_0 - n - m)`` at ``lambda_0 = lambda_+-``
    when ``m = c n``.
    """
    c = m / n if c is None else float(c)
    law = MPLaw(c)
    if not c > 1.0:
        raise ValueError("edge formula requires c > 1")
    g = gamma_edge(law, sign)
    point = ScalingPoint.edge(law, sign)
    rc = math.sqrt(c)
    log_abs = ((2.0 / 3.0) * math.log(n * g) + math.log(2.0 * math.pi)
               + 2.0 * (n - m) * math.log(abs(1.0 + sign * rc)) + (m + 0.5) * math.log(c)
               + sign * 2.0 * n * rc + n ** (1.0 / 3.0) * point.alpha0 * (xi1 + xi2) + 2.0 * kappa4)
    return _signlog(log_abs, airy_kernel(xi1, xi2))


def normalized_ratio_prediction(q: LimitQuery) -> float:
    """Limit of ``F2(x1, x2) / sqrt(F2(x1, x1) F2(x2, x2))`` (k = 1 only)."""
    if q.k != 1:
        raise NotImplementedError("the self-normalized prediction is only defined for k = 1")
    x1, x2 = q.xis
    if q.point.regime is Regime.BULK:
        return sine_kernel(x1, x2)
    return airy_kernel(x1, x2) / math.sqrt(airy_kernel(x1, x1) * airy_kernel(x2, x2))
