"""Semicontinuous envelopes, continuous insertion and semicontinuity checks
for functions sampled on product grids."""

from ._accel import NUMBA_ENABLED
from .baire import (
    ConvergenceReport,
    EnvelopeSequence,
    convergence_report,
    envelope_sequence,
    hahn_insert,
    load_sequence,
    save_sequence,
    truncate,
    truncated_sequence,
)
from .catalog import from_catalog
from .envelopes import (
    EnvelopeParams,
    EnvelopeResult,
    ball_inf_first,
    ball_inf_second,
    ball_sup_first,
    ball_sup_second,
    sliding_extremum_axis,
    sliding_extremum_naive,
    structuring_inf_second,
    structuring_sup_second,
)
from .errors import EnvkitError
from .model import (
    AxisGrid,
    Metric,
    MetricSpec,
    ProductGrid,
    SampledFunction,
    StructuringSet,
    eval_at,
    load,
    refine,
    save,
)
from .verify import (
    CertificationVerdict,
    DeficiencyProfile,
    check_separate_lsc_first,
    check_separate_usc_second,
    refinement_study,
    verify_envelope_joint_lsc,
    verify_envelope_joint_usc,
)

__version__ = "0.1.0"
