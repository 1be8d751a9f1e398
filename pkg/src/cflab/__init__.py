"""Continued-fraction normality laboratory."""
__version__ = "0.1.0"

from .core import (  # noqa: E402
    Cylinder, ConvergentState, DomainError, ExactMeasure, MU_A, MU_E1,
    cf_expand, cf_value, convergents, cylinder, cylinder_measure, gauss_map,
    gauss_measure_interval, measure_sum, push_digit,
)
from .streams import DigitStream, stream_from_digits, stream_from_file  # noqa: E402
from .sampler import GaussSampler, next_digit_distribution, sample_stream  # noqa: E402
