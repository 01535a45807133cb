"""Numerical laboratory for bilinear fractional integrals.

Submodules: ``functions`` (test-function specs), ``quadrature`` (singular
integration), ``operators`` (operator evaluation), ``norms`` (quasi-norms),
``regions`` (exponent geometry), ``experiments`` (drivers and persistence)
and ``cli``.
"""

from ._backend import BACKEND
from .functions import (GridFunction, IndicatorBall, IndicatorBox, RadialPowerLog,
                        SimpleFunction, SmoothBump, SpecError, decreasing_rearrangement_samples,
                        dilate, evaluate, make_h)
from .norms import (SampledField, distribution_function, lebesgue_norm, lorentz_p1_norm,
                    weak_norm, weak_norm_set_lower_bound)
from .operators import (OperatorParams, check_divergence_identity, dyadic_superposition,
                        eval_B, eval_bilinear, eval_dyadic, eval_riesz, eval_stress_tensor)
from .quadrature import (BudgetWarning, ConfigError, Estimate, QuadratureConfig,
                         QuadratureError, integrate_box, integrate_singular)
from .regions import (DivergentSeries, ExponentPoint, InvalidExponent, classify, compute_r,
                      series_A1, series_A2)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "GridFunction", "IndicatorBall", "IndicatorBox", "RadialPowerLog",
    "SimpleFunction", "SmoothBump", "SpecError", "decreasing_rearrangement_samples", "dilate",
    "evaluate", "make_h", "SampledField", "distribution_function", "lebesgue_norm",
    "lorentz_p1_norm", "weak_norm", "weak_norm_set_lower_bound", "OperatorParams",
    "check_divergence_identity", "dyadic_superposition", "eval_B", "eval_bilinear",
    "eval_dyadic", "eval_riesz", "eval_stress_tensor", "BudgetWarning", "ConfigError",
    "Estimate", "QuadratureConfig", "QuadratureError", "integrate_box", "integrate_singular",
    "DivergentSeries", "ExponentPoint", "InvalidExponent", "classify", "compute_r",
    "series_A1", "series_A2",
]
