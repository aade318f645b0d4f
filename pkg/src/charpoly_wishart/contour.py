"""Finite-n contour integrals for ``F_2k`` and checks of the supporting identities.

The ``2k``-fold integral over circles ``|v_j| = r`` is done by the trapezoid
rule, which is spectrally accurate for periodic analytic integrands.  Every
factor is carried as a complex logarithm and summed with max-rescaling.  The
coarse estimate reuses every second node, so one grid gives both ``P`` and
``P/2`` results.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .signlog import LogComplex, SignLog, logsumexp_complex
from .spectral_law import MPLaw, Regime, ScalingPoint, mp_density, support_edges
from .special_fn import vandermonde

__all__ = [
    "ContourSpec",
    "QuadratureResult",
    "contour_f2k_integral",
    "contour_f2k_andreief",
    "assemble_f2k",
    "contour_normalized_ratio",
    "ContourRatio",
    "SaddleReport",
    "saddle_report",
    "re_v_bulk_circle",
    "re_v_edge_circle",
    "edge_quartic_analytic",
    "hciz_closed_form",
    "haar_unitary",
    "hciz_check",
    "superbosonization_constant",
    "superbosonization_check",
    "series_coefficient",
]

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class ContourSpec:
    radius: float = 0.5
    n_points: int = 512

    def __post_init__(self):
        if not (0.0 < self.radius < 1.0):
            raise ValueError(f"contour radius must lie in (0, 1), got {self.radius!r}")
        if self.n_points < 64 or self.n_points % 2:
            raise ValueError(f"n_points must be even and >= 64, got {self.n_points!r}")

    def nodes(self) -> np.ndarray:
        th = 2.0 * math.pi * np.arange(self.n_points) / self.n_points
        return self.radius * np.exp(1j * th)


@dataclass(frozen=True)
class QuadratureResult:
    """Contour integral value plus the ``P`` versus ``P/2`` self-consistency error."""

    value: LogComplex
    coarse: LogComplex
    error_log_mag: float
    rel_error: float
    n_points: int
    radius: float
    tol: float = DEFAULT_TOL

    @property
    def converged(self) -> bool:
        return self.rel_error <= self.tol

    def to_dict(self) -> dict:
        return {"J_logmag": self.value.log_mag, "J_phase": self.value.phase,
                "self_error": self.rel_error, "self_error_logmag": self.error_log_mag,
                "n_points": self.n_points, "radius": self.radius, "converged": self.converged}


def _make_result(fine: LogComplex, coarse: LogComplex, spec: ContourSpec, tol: float) -> QuadratureResult:
    if fine.log_mag == -math.inf:
        return QuadratureResult(fine, coarse, -math.inf, 0.0, spec.n_points, spec.radius, tol)
    d = coarse.scale(-fine.log_mag).value() - fine.scale(-fine.log_mag).value()
    err = abs(d)
    log_err = fine.log_mag + math.log(err) if err > 0 else -math.inf
    return QuadratureResult(fine, coarse, log_err, err, spec.n_points, spec.radius, tol)


def _combine(parts: List[Tuple[float, complex]]) -> LogComplex:
    """Sum of ``exp(mx) * s`` pieces."""
    logs = np.array([complex(mx + math.log(abs(s)), cmath.phase(s)) for mx, s in parts if s != 0])
    return logsumexp_complex(logs) if logs.size else LogComplex(-math.inf)


def _chunk_sum(logs: np.ndarray) -> Tuple[float, complex]:
    mx = float(np.max(logs.real))
    if not math.isfinite(mx):
        return 0.0, 0j
    return mx, complex(np.sum(np.exp(logs - mx)))


def _esym(ys: Sequence[np.ndarray], degree: int):
    """Elementary symmetric polynomial of the given degree in broadcastable arrays."""
    e = [1.0] + [0.0] * degree
    for y in ys:
        for d in range(degree, 0, -1):
            e[d] = e[d] + y * e[d - 1]
    return e[degree]


def _scale_params(point: ScalingPoint, n: int) -> Tuple[float, float, float]:
    """``(a, beta, xi coefficient n^{1-beta} a^{-beta})``."""
    if point.regime is Regime.BULK:
        a, beta = point.rho0, 1.0
    else:
        a, beta = point.gamma, 2.0 / 3.0
    return a, beta, n ** (1.0 - beta) * a ** (-beta)


def _log_one_dim(n: int, m: int, point: ScalingPoint, xis: np.ndarray, k: int, v: np.ndarray,
                 spec: ContourSpec) -> np.ndarray:
    """``log(g_j(v) dv)`` on the nodes; rows are variables ``j``, columns nodes."""
    _, _, coef = _scale_params(point, n)
    nl = n * point.lambda0 + coef * xis
    logv = np.log(v)
    base = m * np.log1p(-v) - (n + 2 * k) * logv
    dv = logv + 1j * 0.5 * math.pi + math.log(2.0 * math.pi / spec.n_points)
    return nl[:, None] * v[None, :] + base[None, :] + dv[None, :]


def contour_f2k_integral(n: int, m: int, point: ScalingPoint, xis: Sequence[float], kappa4: float = 0.0,
                         spec: Optional[ContourSpec] = None, tol: float = DEFAULT_TOL) -> QuadratureResult:
    """The ``2k``-fold contour integral ``J(xi)`` on the tensor trapezoid grid.

    ``J`` is the raw integral over ``prod dv_j`` (no ``2 pi i`` factors).  Cost is
    ``n_points ** (2k)``; ``k`` must be 1 or 2.
    """
    xis = np.asarray(xis, dtype=float)
    if xis.size not in (2, 4):
        raise ValueError("contour quadrature supports k = 1 or 2 (2 or 4 xis)")
    if len(set(xis.tolist())) < xis.size:
        raise ValueError("xis must be distinct (the integrand divides by their Vandermonde)")
    spec = spec or ContourSpec(n_points=512 if xis.size == 2 else 128)
    k = xis.size // 2
    dims = 2 * k
    v = spec.nodes()
    lg = _log_one_dim(n, m, point, xis, k, v, spec)
    log_dxi = cmath.log(vandermonde(xis))
    cmn = m / n
    w = v / (1.0 - v)
    y = cmn - point.lambda0 * (1.0 - v)  # x0 - diagonal entry of (I - V) Lambda_0
    p = spec.n_points

    def axis(a):
        shape = [1] * (dims - 1)
        shape[a] = p
        return shape

    fine, coarse = [], []
    for i0 in range(p):
        # variable 0 fixed at node i0; the remaining dims - 1 variables broadcast
        vs = [v[i0]] + [v.reshape(axis(a)) for a in range(dims - 1)]
        logs = lg[0, i0] + sum(lg[j + 1].reshape(axis(j)) for j in range(dims - 1))
        with np.errstate(divide="ignore"):  # coincident nodes give a zero Vandermonde
            for j in range(dims):
                for i in range(j):
                    logs = logs + np.log(vs[j] - vs[i] + 0j)
        if kappa4 != 0.0:
            ys = [y[i0]] + [y.reshape(axis(a)) for a in range(dims - 1)]
            ws = w[i0] * np.prod([w.reshape(axis(a)) for a in range(dims - 1)], axis=0)
            logs = logs + 2.0 * cmn * kappa4 * _esym(ys, dims - 2) * ws
        logs = np.broadcast_to(logs, (p,) * (dims - 1)) - log_dxi
        fine.append(_chunk_sum(logs))
        if i0 % 2 == 0:
            coarse.append(_chunk_sum(logs[(slice(None, None, 2),) * (dims - 1)]))
    f = _combine(fine)
    c = _combine(coarse).scale(dims * math.log(2.0))
    return _make_result(f, c, spec, tol)


def _logdet(mat: np.ndarray) -> LogComplex:
    sign, logabs = np.linalg.slogdet(mat)
    return LogComplex.from_log(complex(logabs, cmath.phase(sign))) if sign != 0 else LogComplex(-math.inf)


def contour_f2k_andreief(n: int, m: int, point: ScalingPoint, xis: Sequence[float],
                         spec: Optional[ContourSpec] = None, tol: float = DEFAULT_TOL) -> QuadratureResult:
    """The ``kappa4 = 0`` integral through ``det[ int v^i g_j(v) dv ]``.

    Independent of the tensor grid: the Vandermonde of the ``v_j`` is a
    determinant of powers, so the ``2k``-fold integral factorizes into a
    determinant of one-dimensional integrals.
    """
    xis = np.asarray(xis, dtype=float)
    if xis.size % 2 or xis.size == 0:
        raise ValueError("need an even number of xis")
    spec = spec or ContourSpec()
    k = xis.size // 2
    v = spec.nodes()
    lg = _log_one_dim(n, m, point, xis, k, v, spec)
    logv = np.log(v)
    log_dxi = cmath.log(vandermonde(xis))

    def det_for(step: int) -> LogComplex:
        mat = np.empty((2 * k, 2 * k), dtype=complex)
        col_log = np.empty(2 * k)
        entries = []
        for j in range(2 * k):
            row = []
            for i in range(2 * k):
                row.append(logsumexp_complex(lg[j, ::step] + i * logv[::step]).scale(math.log(step)))
            entries.append(row)
            col_log[j] = max(e.log_mag for e in row)
        for j in range(2 * k):
            for i in range(2 * k):
                mat[i, j] = entries[j][i].scale(-col_log[j]).value()
        d = _logdet(mat)
        return LogComplex.from_log(complex(d.log_mag + col_log.sum() - log_dxi.real,
                                           d.phase - log_dxi.imag))

    return _make_result(det_for(1), det_for(2), spec, tol)


def assemble_f2k(result: QuadratureResult, n: int, point: ScalingPoint, k: int,
                 prefactor: str = "asymptotic") -> SignLog:
    """Turn ``J`` into an approximation of ``F_2k`` (real part, as a SignLog).

    ``asymptotic`` uses ``n^{2k^2} (n^{beta-1} a^beta)^{k(2k-1)} / (2^k pi^k e^{2kn})``.
    ``exact`` replaces it by ``(-1)^{k(2k-1)} prod_s (n+s)! / n^{2kn} / (2 pi i)^{2k}``
    times the same scaling power, which is an identity for Gaussian entries.
    """
    a, beta, _ = _scale_params(point, n)
    log_scale = k * (2 * k - 1) * ((beta - 1.0) * math.log(n) + beta * math.log(a))
    j = result.value
    if prefactor == "asymptotic":
        logp = 2 * k * k * math.log(n) + log_scale - k * math.log(2 * math.pi) - 2 * k * n
        return j.real_signlog.scale(logp)
    if prefactor == "exact":
        logp = (sum(gammaln(n + s + 1) for s in range(2 * k)) - 2 * k * n * math.log(n)
                + log_scale - 2 * k * math.log(2 * math.pi))
        # (2 pi i)^{-2k} contributes (-1)^k; combined with (-1)^{k(2k-1)} this is +1
        return j.real_signlog.scale(logp)
    raise ValueError("prefactor must be 'asymptotic' or 'exact'")


@dataclass(frozen=True)
class ContourRatio:
    ratio: float
    numerator: QuadratureResult
    normalizers: tuple
    eps: float
    richardson_shift: float
    imag_over_real: float

    @property
    def converged(self) -> bool:
        return self.numerator.converged and all(r.converged for pair in self.normalizers for r in pair)


def _re_scaled(r: QuadratureResult, log_ref: float) -> float:
    return r.value.scale(-log_ref).value().real


def contour_normalized_ratio(n: int, m: int, point: ScalingPoint, xi1: float, xi2: float,
                             kappa4: float = 0.0, spec: Optional[ContourSpec] = None,
                             eps: float = 1e-3, tol: float = DEFAULT_TOL) -> ContourRatio:
    """``J(xi1, xi2) / sqrt(J(xi1, xi1) J(xi2, xi2))`` at ``k = 1``.

    The coincident normalizers are limits ``eps -> 0`` of ``J(xi + eps, xi - eps)``,
    which is even in ``eps``; one Richardson step on ``(eps, 2 eps)`` removes the
    ``eps**2`` term.
    """
    spec = spec or ContourSpec()
    num = contour_f2k_integral(n, m, point, [xi1, xi2], kappa4, spec, tol)
    pairs, logs = [], []
    for xi in (xi1, xi2):
        r1 = contour_f2k_integral(n, m, point, [xi + eps, xi - eps], kappa4, spec, tol)
        r2 = contour_f2k_integral(n, m, point, [xi + 2 * eps, xi - 2 * eps], kappa4, spec, tol)
        ref = r1.value.log_mag
        j1, j2 = _re_scaled(r1, ref), _re_scaled(r2, ref)
        pairs.append((r1, r2))
        logs.append((ref, (4.0 * j1 - j2) / 3.0, abs(j1 - j2) / abs(j1)))
    (l1, d1, s1), (l2, d2, s2) = logs
    ref = num.value.log_mag
    jn = num.value.scale(-ref).value()
    if d1 <= 0 or d2 <= 0:
        ratio = float("nan")
    else:
        ratio = jn.real / math.sqrt(d1 * d2) * math.exp(ref - 0.5 * (l1 + l2))
    return ContourRatio(ratio, num, tuple(pairs), eps, max(s1, s2),
                        abs(jn.imag) / abs(jn.real) if jn.real else math.inf)


# ------------------------------------------------------------------ saddle diagnostics


def re_v_bulk_circle(lambda0: float, c_mn: float, phi) -> np.ndarray:
    """``Re V`` on the circle ``|v| = lambda0^{-1/2}`` as a function of the angle."""
    phi = np.asarray(phi, dtype=float)
    r = lambda0 ** -0.5
    s_star = 0.5 * (lambda0 - c_mn + 1.0) + 0.5 * c_mn * math.log(c_mn / lambda0) - 0.5 * math.log(1.0 / lambda0)
    # |1 - v|^2 = (1 - r)^2 + 4 r sin^2(phi / 2), written without cancellation
    mod2 = (1.0 - r) ** 2 + 4.0 * r * np.sin(0.5 * phi) ** 2
    with np.errstate(divide="ignore"):  # c = 1, lambda0 = 1 passes through v = 1
        return -math.sqrt(lambda0) * np.cos(phi) - 0.5 * c_mn * np.log(mod2) + math.log(r) + s_star


def re_v_edge_circle(c_mn: float, phi) -> np.ndarray:
    """``Re V^{(+)}`` on ``|v| = lambda_+^{-1/2}``, in a cancellation-free form.

    With ``v0 = lambda_+^{-1/2}`` the value is
    ``2 sqrt(lambda_+) sin^2(phi/2) - (c/2) log1p(4 v0 sin^2(phi/2) / (1 - v0)^2)``.
    """
    phi = np.asarray(phi, dtype=float)
    rc = math.sqrt(c_mn)
    v0 = 1.0 / (1.0 + rc)
    s2 = np.sin(0.5 * phi) ** 2
    return 2.0 * (1.0 + rc) * s2 - 0.5 * c_mn * np.log1p(4.0 * v0 * s2 / (1.0 - v0) ** 2)


def _v_function_edge(c_mn: float, v: complex) -> complex:
    rc = math.sqrt(c_mn)
    lp = (1.0 + rc) ** 2
    s_plus = -1.0 - rc - c_mn * math.log(1.0 - 1.0 / (1.0 + rc)) - math.log(1.0 + rc)
    return -lp * v - c_mn * cmath.log(1.0 - v) + cmath.log(v) - s_plus


def edge_quartic_analytic(c_mn: float) -> float:
    """Taylor coefficient of ``phi^4`` in ``Re V^{(+)}(lambda_+^{-1/2} e^{i phi})``.

    Expanding the half-angle form above gives ``(1 + sqrt c)^2 / (4 c)``.
    """
    return (1.0 + math.sqrt(c_mn)) ** 2 / (4.0 * c_mn)


@dataclass(frozen=True)
class SaddleReport:
    lambda0: float
    c_mn: float
    regime: str
    v_plus: Optional[complex]
    v_minus: Optional[complex]
    re_v_at_saddle: Optional[float]
    re_v_at_saddle_minus: Optional[float]
    c_plus: Optional[complex]
    c_minus: Optional[complex]
    c_product_target: Optional[float]
    edge_v0: float
    edge_v_at_v0: float
    quartic_coeff: float
    quartic_coeff_analytic: float
    edge_monotone: bool
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def cx(z):
            return None if z is None else [z.real, z.imag]
        return {
            "lambda0": self.lambda0, "c_mn": self.c_mn, "regime": self.regime,
            "v_plus": cx(self.v_plus), "v_minus": cx(self.v_minus),
            "abs_v_plus": None if self.v_plus is None else abs(self.v_plus),
            "re_v_at_saddle": self.re_v_at_saddle, "re_v_at_saddle_minus": self.re_v_at_saddle_minus,
            "c_plus": cx(self.c_plus), "c_minus": cx(self.c_minus),
            "c_product": cx(None if self.c_plus is None else self.c_plus * self.c_minus),
            "c_product_target": self.c_product_target,
            "edge_v0": self.edge_v0, "edge_v_at_v0": self.edge_v_at_v0,
            "quartic_coeff": self.quartic_coeff, "quartic_coeff_analytic": self.quartic_coeff_analytic,
            "edge_monotone": self.edge_monotone, **self.extras,
        }


def fit_quartic(c_mn: float, half_width: float = 0.05, points: int = 201) -> float:
    """Least-squares ``a`` in ``Re V^{(+)} ~ a phi^4`` on ``[-half_width, half_width]``."""
    phi = np.linspace(-half_width, half_width, points)
    y = re_v_edge_circle(c_mn, phi)
    x = phi ** 4
    return float(np.dot(x, y) / np.dot(x, x))


def saddle_report(point: ScalingPoint, c_mn: Optional[float] = None, grid: int = 10_000) -> SaddleReport:
    """Saddle-point structure of the phase functions at ``point``.

    Bulk fields use the law with aspect ratio ``c_mn``; edge fields refer to
    the upper edge of that law.
    """
    c_mn = point.c if c_mn is None else float(c_mn)
    law = MPLaw(c_mn)
    lam = point.lambda0
    vp = vm = rv = rvm = cp = cm = target = None
    if point.regime is Regime.BULK:
        lo, hi = support_edges(law)
        if not lo < lam < hi:
            raise ValueError(f"lambda0={lam} is outside the support for c={c_mn}")
        rho = mp_density(law, lam)
        re = (lam - c_mn + 1.0) / (2.0 * lam)
        vp = complex(re, math.pi * rho)
        vm = vp.conjugate()
        s_star = 0.5 * (lam - c_mn + 1.0) + 0.5 * c_mn * math.log(c_mn / lam) - 0.5 * math.log(1.0 / lam)

        def vfun(v):
            return -lam * v - c_mn * cmath.log(1.0 - v) + cmath.log(v) + s_star

        rv, rvm = vfun(vp).real, vfun(vm).real
        cp = 1.0 - c_mn * vp * vp / (1.0 - vp) ** 2
        cm = 1.0 - c_mn * vm * vm / (1.0 - vm) ** 2
        target = 4.0 * math.pi ** 2 * lam ** 2 * rho ** 2 / c_mn
    elif point.regime is Regime.EDGE_MINUS:
        raise NotImplementedError("edge diagnostics are provided for the upper edge only")
    v0 = 1.0 / (1.0 + math.sqrt(c_mn))
    phi = np.linspace(0.0, math.pi, grid, endpoint=False)
    mono = bool(np.all(np.diff(re_v_edge_circle(c_mn, phi)) > 0))
    return SaddleReport(lam, c_mn, point.regime.value, vp, vm, rv, rvm, cp, cm, target,
                        v0, _v_function_edge(c_mn, v0).real, fit_quartic(c_mn),
                        edge_quartic_analytic(c_mn), mono)


# ------------------------------------------------------------------ HCIZ at p = 2


def hciz_closed_form(a1: float, a2: float, b1: float, b2: float) -> float:
    """``(e^{a1 b1 + a2 b2} - e^{a1 b2 + a2 b1}) / ((a1 - a2)(b1 - b2))``, stable near ``b1 = b2``."""
    d = (a1 - a2) * (b1 - b2)
    base = math.exp(a1 * b2 + a2 * b1)
    return base if d == 0 else base * math.expm1(d) / d


def haar_unitary(rng: np.random.Generator, size: int, p: int = 2) -> np.ndarray:
    """Haar unitaries: QR of a complex Gaussian with the phases of ``diag(R)`` removed."""
    z = (rng.standard_normal((size, p, p)) + 1j * rng.standard_normal((size, p, p))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def hciz_check(a1: float, a2: float, b1: float, b2: float, n_samples: int = 1_000_000,
               seed: int = 0, batch: int = 200_000) -> Tuple[float, float, float]:
    """``(mc_value, closed_form, z)`` for the average of ``exp tr(A U* B U)`` over U(2)."""
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 10^4")
    rng = np.random.Generator(np.random.Philox(key=seed))
    a = np.array([a1, a2])
    b = np.array([b1, b2])
    total = total2 = 0.0
    done = 0
    while done < n_samples:
        size = min(batch, n_samples - done)
        u = haar_unitary(rng, size)
        # tr(A U* B U) = sum_{i,j} a_i b_j |U_ji|^2
        tr = np.einsum("i,j,nji->n", a, b, np.abs(u) ** 2)
        vals = np.exp(tr)
        total += math.fsum(vals)
        total2 += math.fsum(vals * vals)
        done += size
    mean = total / n_samples
    var = max(total2 / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    se = math.sqrt(var / n_samples)
    closed = hciz_closed_form(a1, a2, b1, b2)
    return mean, closed, (mean - closed) / se if se > 0 else 0.0


# ------------------------------------------------------------------ superbosonization at p <= 2


def superbosonization_constant(p: int, l: int) -> float:
    """``(-1)^{p(p-1)/2} prod_{s<p} (l+s)! / prod_{s=1..p} s!``."""
    sp = math.prod(math.factorial(s) for s in range(1, p + 1))
    return (-1) ** (p * (p - 1) // 2) * math.prod(math.factorial(l + s) for s in range(p)) / sp


def series_coefficient(log_f, power: int, spec: ContourSpec) -> complex:
    """``(1 / 2 pi i) oint f(v) / v^{power+1} dv`` by the trapezoid rule; ``log_f`` maps nodes to ``log f``."""
    v = spec.nodes()
    logs = log_f(v) - power * np.log(v)
    return logsumexp_complex(logs).value() / spec.n_points


def superbosonization_check(p: int, l: int, a_diag: Sequence[float],
                            spec: Optional[ContourSpec] = None) -> Tuple[float, float]:
    """``(lhs, rhs)`` of ``det^l A = K_{p,l} int e^{tr AU} / det^{p+l} U d mu(U)`` for diagonal ``A``.

    The angular part of ``d mu`` is integrated exactly by the HCIZ formula; the
    eigenvalue circles are done by quadrature.
    """
    a = np.asarray(a_diag, dtype=float)
    if p not in (1, 2) or a.size != p:
        raise ValueError("p must be 1 or 2 with p diagonal entries")
    if l < 0:
        raise ValueError("l must be non-negative")
    spec = spec or ContourSpec(radius=0.9, n_points=2048 if p == 2 else 256)
    rhs = float(np.prod(a ** l))
    k = superbosonization_constant(p, l)
    u = spec.nodes()
    du = 1j * u * (2.0 * math.pi / spec.n_points) / (2j * math.pi)  # du / (2 pi i)
    if p == 1:
        val = np.sum(np.exp(a[0] * u) / u ** (1 + l) * du)
        return float((k * val).real), rhs
    a1, a2 = a
    if a1 == a2:
        raise ValueError("p = 2 needs distinct diagonal entries")
    u1 = u[:, None]
    u2 = u[None, :]
    # Vandermonde^2 times the HCIZ angular average, with one (u1 - u2) cancelled
    f = (u1 - u2) * (np.exp(a1 * u1 + a2 * u2) - np.exp(a1 * u2 + a2 * u1)) / (a1 - a2)
    f = f / (u1 * u2) ** (2 + l) * du[:, None] * du[None, :]
    return float((k * np.sum(f)).real), rhs
