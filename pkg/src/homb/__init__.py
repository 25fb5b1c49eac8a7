"""Hong-Ou-Mandel interference of biphoton frequency combs."""

from .errors import (
    AnalysisError,
    DomainError,
    GeometryError,
    HombError,
    ParseError,
    ResolutionError,
    SamplingError,
    TruncationError,
)
from .interference import (
    DelayAxis,
    HomTrace,
    mixture_trace,
    numeric_trace,
    oracle_trace,
    phase_average_trace,
    state_trace,
    superposition_trace,
    visibility,
)
from .spectral import BinGrid, Convention, FrequencyGrid, LineshapeKind, ghz_to_rad_ps, rad_ps_to_ghz
from .states import (
    BfcState,
    MixedState,
    PerBin,
    PhaseMask,
    Placement,
    Polynomial,
    RandomPerBin,
    apply_phase_mask,
    joint_spectral_amplitude,
    make_comb,
    make_mixture,
    make_pair,
    make_superposition,
    mixture_of_pairs,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "BfcState",
    "BinGrid",
    "Convention",
    "DelayAxis",
    "FrequencyGrid",
    "DomainError",
    "GeometryError",
    "HomTrace",
    "LineshapeKind",
    "HombError",
    "MixedState",
    "ParseError",
    "PerBin",
    "PhaseMask",
    "Placement",
    "Polynomial",
    "RandomPerBin",
    "ResolutionError",
    "SamplingError",
    "TruncationError",
    "apply_phase_mask",
    "ghz_to_rad_ps",
    "joint_spectral_amplitude",
    "make_comb",
    "make_mixture",
    "make_pair",
    "make_superposition",
    "mixture_of_pairs",
    "mixture_trace",
    "numeric_trace",
    "oracle_trace",
    "phase_average_trace",
    "rad_ps_to_ghz",
    "state_trace",
    "superposition_trace",
    "visibility",
]
