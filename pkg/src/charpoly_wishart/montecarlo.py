"""Monte Carlo estimation of characteristic-polynomial moments.

Workers map fixed index chunks to tables of ``(sign, log|det(lambda - H)|)``.
All accumulation happens afterwards in index order on the calling thread, and
BLAS is pinned to one thread while sampling.  Results therefore do not depend
on the worker count.
"""
from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from threadpoolctl import threadpool_limits

from .ensemble import EnsembleConfig, log_char_polys, sample_spectrum
from .errors import DegenerateEstimateError
from .signlog import SignLog, SignLogAccumulator
from .spectral_law import ScalingPoint, scaled_lambdas

__all__ = [
    "CHUNK",
    "JACKKNIFE_BLOCKS",
    "default_threads",
    "logdet_table",
    "MCEstimate",
    "RatioEstimate",
    "estimate_f2k",
    "estimate_normalized_ratio",
    "universality_compare",
    "estimate_d2k",
]

CHUNK = 64
JACKKNIFE_BLOCKS = 50
MAX_K = 2
WORK_BUDGET = 5e12  # n_samples * n**3 above which a warning is issued
THREADS_ENV = "CHARPOLY_THREADS"


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _chunk(config: EnsembleConfig, lambdas: np.ndarray, start: int, stop: int):
    signs = np.empty((stop - start, lambdas.size), dtype=np.int8)
    logs = np.empty((stop - start, lambdas.size))
    for row, i in enumerate(range(start, stop)):
        s, l = log_char_polys(sample_spectrum(config, i).eigenvalues, lambdas)
        signs[row] = s
        logs[row] = l
    return signs, logs


def logdet_table(config: EnsembleConfig, lambdas: Sequence[float], n_samples: int,
                 threads: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample, per-lambda signs and log-magnitudes of ``det(lambda - H)``.

    Row ``i`` comes from sample index ``i``; shapes are ``(n_samples, len(lambdas))``.
    """
    lam = np.asarray(lambdas, dtype=float).ravel()
    threads = default_threads() if threads is None else max(1, int(threads))
    bounds = [(a, min(a + CHUNK, n_samples)) for a in range(0, n_samples, CHUNK)]
    with threadpool_limits(limits=1):
        if threads == 1:
            parts = [_chunk(config, lam, a, b) for a, b in bounds]
        else:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(lambda ab: _chunk(config, lam, *ab), bounds))
    if not parts:
        return np.empty((0, lam.size), dtype=np.int8), np.empty((0, lam.size))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _accumulate(signs: np.ndarray, logs: np.ndarray) -> SignLogAccumulator:
    acc = SignLogAccumulator()
    acc.add_many(signs, logs)
    return acc


def _products(signs: np.ndarray, logs: np.ndarray, cols: Sequence[int]):
    s = np.prod(signs[:, list(cols)].astype(np.int64), axis=1)
    with np.errstate(invalid="ignore"):
        l = np.sum(logs[:, list(cols)], axis=1)
    return s, np.where(s == 0, -np.inf, l)


@dataclass(frozen=True)
class MCEstimate:
    mean: SignLog
    rel_stderr: float
    n_samples: int
    config: EnsembleConfig
    lambdas: tuple

    def to_dict(self) -> dict:
        return {"mean": self.mean.to_dict(), "rel_stderr": self.rel_stderr,
                "n_samples": self.n_samples, "config": self.config.to_dict(),
                "lambdas": list(self.lambdas)}


def _check_k(n_lambdas: int, n: int, n_samples: int, max_k: int) -> None:
    if n_lambdas % 2 or n_lambdas == 0:
        raise ValueError(f"need an even, positive number of lambdas, got {n_lambdas}")
    k = n_lambdas // 2
    if k > max_k:
        raise ValueError(f"k = {k} exceeds the cap {max_k}; products of many determinants "
                         "have very heavy tails (pass max_k to override)")
    if k >= 2 or n_samples * n ** 3 > WORK_BUDGET:
        warnings.warn(f"k = {k}, n = {n}, {n_samples} samples: expect large variance and/or runtime",
                      RuntimeWarning, stacklevel=3)


def estimate_f2k(config: EnsembleConfig, lambdas: Sequence[float], n_samples: int,
                 threads: Optional[int] = None, max_k: int = MAX_K) -> MCEstimate:
    """Sample mean of ``prod_j det(lambda_j - H)`` over indices ``0..n_samples-1``."""
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    lam = np.asarray(lambdas, dtype=float).ravel()
    _check_k(lam.size, config.n, n_samples, max_k)
    uniq, inv = np.unique(lam, return_inverse=True)
    signs, logs = logdet_table(config, uniq, n_samples, threads)
    s, l = _products(signs, logs, inv)
    acc = _accumulate(s, l)
    mean = acc.mean()
    if mean.sign == 0:
        raise DegenerateEstimateError(
            f"estimate is exactly zero for lambdas={lam.tolist()} ({n_samples} samples)")
    return MCEstimate(mean, acc.rel_stderr(), n_samples, config, tuple(lam.tolist()))


@dataclass(frozen=True)
class RatioEstimate:
    """Self-normalized ratio with its jackknife error; unpacks as ``(ratio, stderr)``."""

    ratio: float
    stderr: float
    n_samples: int
    lambdas: tuple
    jackknife_values: tuple = field(default=(), repr=False)

    def __iter__(self):
        return iter((self.ratio, self.stderr))

    def to_dict(self) -> dict:
        return {"ratio": self.ratio, "stderr": self.stderr, "n_samples": self.n_samples,
                "lambdas": list(self.lambdas)}


def _log_ratio(a12: SignLogAccumulator, a11: SignLogAccumulator, a22: SignLogAccumulator) -> float:
    m12, m11, m22 = a12.mean(), a11.mean(), a22.mean()
    if m11.sign <= 0 or m22.sign <= 0:
        raise DegenerateEstimateError(
            "coincident-point normalizer is not positive; too few samples")
    if m12.sign == 0:
        return 0.0
    return m12.sign * math.exp(m12.log_mag - 0.5 * (m11.log_mag + m22.log_mag))


def _check_point(config: EnsembleConfig, point: ScalingPoint) -> None:
    if abs(config.c_mn - point.c) > 0.1 * point.c:
        raise ValueError(f"scaling point built for c = {point.c:g} but m/n = {config.c_mn:g}")


def ratio_from_table(signs: np.ndarray, logs: np.ndarray, blocks: int = JACKKNIFE_BLOCKS,
                     cols: Tuple[int, int] = (0, 1)) -> Tuple[float, float, List[float]]:
    """Ratio and jackknife error from a two-column logdet table."""
    i, j = cols
    n = signs.shape[0]
    if n < blocks:
        raise ValueError(f"need at least {blocks} samples for {blocks} jackknife blocks")
    cuts = np.linspace(0, n, blocks + 1).round().astype(int)
    parts = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        parts.append(tuple(_accumulate(*_products(signs[a:b], logs[a:b], c))
                           for c in ((i, j), (i, i), (j, j))))
    # prefix[b] merges blocks < b, suffix[b] merges blocks >= b
    empty = (SignLogAccumulator(), SignLogAccumulator(), SignLogAccumulator())
    prefix = [empty]
    for p in parts:
        prefix.append(tuple(x.merge(y) for x, y in zip(prefix[-1], p)))
    suffix = [empty]
    for p in reversed(parts):
        suffix.append(tuple(y.merge(x) for x, y in zip(suffix[-1], p)))
    suffix = suffix[::-1]
    full = _log_ratio(*prefix[-1])
    loo = [_log_ratio(*(x.merge(y) for x, y in zip(prefix[b], suffix[b + 1]))) for b in range(blocks)]
    arr = np.asarray(loo)
    stderr = math.sqrt((blocks - 1) / blocks * float(np.sum((arr - arr.mean()) ** 2)))
    return full, stderr, loo


def estimate_normalized_ratio(config: EnsembleConfig, point: ScalingPoint, xi1: float, xi2: float,
                              n_samples: int, threads: Optional[int] = None,
                              blocks: int = JACKKNIFE_BLOCKS) -> RatioEstimate:
    """``F2(l1, l2) / sqrt(F2(l1, l1) F2(l2, l2))`` from one common sample stream."""
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    _check_point(config, point)
    lam = scaled_lambdas(point, config.n, [xi1, xi2])
    signs, logs = logdet_table(config, lam, n_samples, threads)
    ratio, stderr, loo = ratio_from_table(signs, logs, blocks)
    return RatioEstimate(ratio, stderr, n_samples, tuple(lam.tolist()), tuple(loo))


def universality_compare(config_a: EnsembleConfig, config_b: EnsembleConfig, point: ScalingPoint,
                         xi1: float, xi2: float, n_samples: int,
                         threads: Optional[int] = None) -> Tuple[float, float, float]:
    """``(ratio_a, ratio_b, z)`` with ``z`` the difference over the combined jackknife error."""
    if (config_a.n, config_a.m) != (config_b.n, config_b.m):
        raise ValueError("both configs must share n and m")
    ra = estimate_normalized_ratio(config_a, point, xi1, xi2, n_samples, threads)
    rb = ra if config_b == config_a else estimate_normalized_ratio(config_b, point, xi1, xi2, n_samples, threads)
    diff = ra.ratio - rb.ratio
    if diff == 0.0:
        return ra.ratio, rb.ratio, 0.0
    return ra.ratio, rb.ratio, diff / math.hypot(ra.stderr, rb.stderr)


def estimate_d2k(config: EnsembleConfig, point: ScalingPoint, xis: Sequence[float], n_samples: int,
                 threads: Optional[int] = None) -> List[SignLog]:
    """Coincident-point normalizers ``local_scale * F2(lambda_l, lambda_l)``, one per xi."""
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    _check_point(config, point)
    lam = scaled_lambdas(point, config.n, xis)
    uniq, inv = np.unique(lam, return_inverse=True)
    signs, logs = logdet_table(config, uniq, n_samples, threads)
    log_scale = math.log(point.local_scale(config.n))
    per_unique = []
    for col in range(uniq.size):
        mean = _accumulate(*_products(signs, logs, (col, col))).mean()
        if mean.sign <= 0:
            raise DegenerateEstimateError(f"non-positive coincident estimate at lambda={uniq[col]}")
        per_unique.append(mean.scale(log_scale))
    return [per_unique[i] for i in inv]


def timed(fn, *args, **kwargs):
    """``(result, seconds)``."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
