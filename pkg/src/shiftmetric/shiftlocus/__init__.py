"""From critical heights of shift-locus polynomials to rose length functions."""

from .families import (
    BUILTIN_FAMILIES,
    AsymptoticsReport,
    CauchyReport,
    IndexSetReport,
    SequenceFamily,
    cauchy_probe,
    compile_expression,
    entropy_asymptotics,
    family_leg,
    index_set,
    sharp_little_o_rate,
)
from .lengths import (
    BaseLength,
    HeightSegment,
    RhoResult,
    TwistSegment,
    TwistState,
    base_length,
    base_lengths_array,
    height_segment,
    nongeneric_crossings,
    rho_upper,
    segment_entropy_length,
    twist_H0,
    twist_length,
)
