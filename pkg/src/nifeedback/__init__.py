"""State-feedback synthesis and verification of negative imaginary systems."""

from .errors import (
    ConstructionError,
    DimensionError,
    GateError,
    NIError,
    NumericalError,
    OptionError,
    PoleEvaluationError,
    PreconditionError,
    SynthesisError,
    UnsupportedRelativeDegreeError,
    WellPosednessError,
)
from .ltimodel import StateSpaceModel, dc_gain, eval_tf, freq_sweep, is_minimal, relative_degree
from .nisynth import (
    GateResult,
    SSNIRefusal,
    SynthesisOptions,
    SynthesisResult,
    gate_feedback_equivalence,
    synth_ni,
    synth_ssni,
)
from .niverify import VerificationReport, verify_ni_certificate, verify_ni_freq, verify_ssni_certificate, verify_ssni_freq
from .numkernel import DEFAULT_TOL, Tolerances

__version__ = "0.1.0"
