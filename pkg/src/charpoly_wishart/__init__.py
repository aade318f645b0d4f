"""Characteristic-polynomial correlations of sample covariance matrices.

Monte Carlo, contour-integral and closed-form routes to averages of products
of ``det(lambda - H)`` with ``H = A* A / n``, in the bulk and at the soft edges
of the Marchenko-Pastur law.
"""
from .ensemble import EnsembleConfig, EntryDistribution, SampleSpectrum, sample_spectrum
from .errors import (AiryRangeError, CharpolyError, ConditioningError, DegenerateEstimateError,
                     EigensolverError)
from .signlog import SignLog, SignLogAccumulator
from .spectral_law import MPLaw, Regime, ScalingPoint, mp_density, scaled_lambdas
from .special_fn import airy, airy_kernel, airy_prime, sine_kernel
from .predictions import LimitQuery, limit_factors, normalized_ratio_prediction
from .montecarlo import estimate_f2k, estimate_normalized_ratio
from .contour import ContourSpec, contour_f2k_integral, contour_normalized_ratio, saddle_report
from .verify import run_suite

__version__ = "0.1.0"
