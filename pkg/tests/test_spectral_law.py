import math

import numpy as np
import pytest
from scipy import integrate

import oracles
from charpoly_wishart.ensemble import EnsembleConfig, sample_spectrum
from charpoly_wishart.spectral_law import (DEFAULT_XI_WINDOW, MPLaw, Regime, ScalingPoint, alpha_coeff,
                                           gamma_edge, ks_distance, mp_cdf, mp_density, mp_sample,
                                           scaled_lambdas, support_edges)


def test_density_examples():
    assert mp_density(MPLaw(1.0), 2.0) == pytest.approx(1 / (2 * math.pi), abs=1e-12)
    assert mp_density(MPLaw(2.0), 6.0) == 0.0
    assert mp_density(MPLaw(2.0), 3.0) == pytest.approx(0.150053, abs=1e-6)
    for c in (1.0, 2.0, 4.0, 9.5):
        for lam in np.linspace(0.05, 20, 37):
            assert mp_density(MPLaw(c), lam) == pytest.approx(oracles.mp_density(c, lam), abs=1e-14)


def test_density_zero_at_edges_and_positive_inside():
    for c in (1.5, 2.0, 4.0):
        law = MPLaw(c)
        lo, hi = support_edges(law)
        assert mp_density(law, lo) == 0.0 and mp_density(law, hi) == 0.0
        inner = np.linspace(lo, hi, 1001)[1:-1]
        assert np.all(mp_density(law, inner) > 0)


@pytest.mark.parametrize("c", [1.0, 1.3, 2.0, 4.0, 25.0])
def test_density_normalization(c):
    law = MPLaw(c)
    lo, hi = support_edges(law)
    # independent of the package's own substitution: scipy's algebraic-weight quadrature
    if c > 1:
        val = integrate.quad(lambda x: 1.0 / (2 * math.pi * x), lo, hi, weight="alg",
                             wvar=(0.5, 0.5), epsabs=1e-13)[0]
    else:  # hard edge at 0: rho = (4 - x)^(1/2) x^(-1/2) / (2 pi)
        val = integrate.quad(lambda x: 1.0 / (2 * math.pi), lo, hi, weight="alg",
                             wvar=(-0.5, 0.5), epsabs=1e-13)[0]
    assert val == pytest.approx(1.0, abs=1e-10)
    assert float(mp_cdf(law, hi)) == pytest.approx(1.0, abs=1e-10)
    assert float(mp_cdf(law, lo)) == 0.0


def test_edges_gamma_alpha():
    lo, hi = support_edges(MPLaw(2.0))
    assert lo == pytest.approx(0.171573, abs=1e-6) and hi == pytest.approx(5.828427, abs=1e-6)
    assert support_edges(MPLaw(4.0)) == (1.0, 9.0)
    assert gamma_edge(MPLaw(4.0), 1) == pytest.approx(math.sqrt(2) / 9, rel=1e-14)
    with pytest.raises(ValueError):
        gamma_edge(MPLaw(1.0), -1)
    law = MPLaw(2.0)
    alpha = (3.0 - 2.0 + 1.0) / (2 * 3.0 * oracles.mp_density(2.0, 3.0))
    assert alpha == pytest.approx(2.2214414690791835, rel=1e-14)
    assert alpha_coeff(ScalingPoint.bulk(law, 3.0), law) == pytest.approx(alpha, rel=1e-14)
    assert alpha_coeff(ScalingPoint.edge(MPLaw(4.0), 1)) == pytest.approx(1.14471, abs=1e-5)
    assert alpha_coeff(ScalingPoint.bulk(MPLaw(1.0), 2.0)) == pytest.approx(math.pi, rel=1e-12)


def test_scaling_point_invariants():
    with pytest.raises(ValueError):
        ScalingPoint.bulk(MPLaw(2.0), 6.0)
    with pytest.raises(ValueError):
        ScalingPoint.bulk(MPLaw(2.0), support_edges(MPLaw(2.0))[1])
    p = ScalingPoint.make(MPLaw(4.0), "edge-")
    assert p.regime is Regime.EDGE_MINUS and p.lambda0 == 1.0
    with pytest.raises(ValueError):
        ScalingPoint.make(MPLaw(4.0), "middle")
    with pytest.raises(ValueError):
        MPLaw(0.5)
    assert DEFAULT_XI_WINDOW == 5


def test_scaled_lambdas_examples():
    law = MPLaw(2.0)
    p = ScalingPoint.bulk(law, 3.0)
    assert scaled_lambdas(p, 100, [0.0])[0] == 3.0
    assert scaled_lambdas(p, 100, [1.0])[0] == pytest.approx(3.066643, abs=1e-6)
    e = ScalingPoint.edge(MPLaw(4.0), 1)
    # (1000 sqrt(2)/9)^(-2/3) evaluated independently
    shift = (1000 * math.sqrt(2) / 9) ** (-2 / 3)
    assert shift == pytest.approx(0.0343414, abs=1e-7)
    assert scaled_lambdas(e, 1000, [-1.0])[0] == pytest.approx(9 - shift, abs=1e-12)


def test_bulk_and_edge_spacings_cross_at_n_two_thirds():
    law = MPLaw(2.0)
    hi = law.lambda_plus
    g = gamma_edge(law, 1)
    scaled = []
    for n in (10**4, 10**5, 10**6, 10**7):
        edge_unit = (n * g) ** (-2 / 3)
        deltas = np.geomspace(1e-9, 1.0, 4000)
        bulk_unit = np.array([1 / (n * mp_density(law, hi - d)) for d in deltas])
        assert np.all(np.diff(bulk_unit) < 0)  # spacing shrinks moving inward
        cross = deltas[np.argmax(bulk_unit < edge_unit)]
        assert 0 < cross < 1.0
        scaled.append(cross * n ** (2 / 3))
    # delta * n^(2/3) settles to a constant: the crossing sits at |lambda0 - lambda_+| ~ n^(-2/3)
    steps = np.abs(np.diff(scaled))
    assert max(scaled) / min(scaled) < 1.02
    assert steps[-1] < steps[0]


def test_ks_against_synthetic_mp_draws():
    law = MPLaw(2.0)
    x = mp_sample(law, 10_000, np.random.default_rng(5))
    assert ks_distance(x, law) < 0.02
    assert ks_distance(x, x) == 0.0


def test_ks_single_large_sample():
    spec = sample_spectrum(EnsembleConfig(512, 1024, seed=0), 0)
    assert ks_distance([spec], MPLaw(2.0)) < 0.05


def test_ks_median_decreases_with_n():
    law = MPLaw(2.0)
    medians = []
    for n in (64, 128, 256, 512):
        cfg = EnsembleConfig(n, 2 * n, seed=100 + n)
        medians.append(np.median([ks_distance([sample_spectrum(cfg, i)], law) for i in range(20)]))
    assert all(b <= a for a, b in zip(medians, medians[1:])), medians


def test_ks_requires_data():
    with pytest.raises(ValueError):
        ks_distance([], MPLaw(2.0))
