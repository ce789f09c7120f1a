"""Thermodynamic (entropy) metric on roses and other finite metric graphs."""

from .cycles import (
    CycleComplex,
    F_gamma,
    cycle_complex,
    grad_F,
    hess_F_quadform,
    norm_sq_cycles,
    pairing_F,
    simple_cycles,
)
from .graph import (
    LengthFunction,
    MetricGraph,
    as_length_function,
    circuit_count,
    enumerate_circuits,
    make_rose,
    weighted_matrix,
)
from .metric import (
    TangentVector,
    embed_extended,
    embed_tangent,
    entropy_norm_sq,
    entropy_norm_sq_batch,
    logistic_weights,
    project_tangent,
)
from .paths import (
    ConcatPath,
    DistanceResult,
    FunctionPath,
    LinearPath,
    LogPolygonPath,
    Quadrature,
    ReversedPath,
    distance_upper,
    path_length,
    speed,
)
from .thermo import (
    ENTROPY_METHODS,
    entropy,
    entropy_batch,
    entropy_gradient,
    normalize_unit_entropy,
    pressure,
    rose_closed_sum,
    rose_det,
    spectral_radius,
)
