"""Streaming compressed sensing.

Recursive window encoding over a sliding window, warm-started iterative
LASSO decoding, vote-based support detection with least-squares debiasing,
and cross-window averaging, plus an experiment harness.
"""

from .linalg import SingularSystemError, gram_solve, matvec, spectral_norm_sq
from .sensing import (
    PermutationOffset,
    SensingMatrix,
    basis_coherence,
    column,
    gen_achlioptas,
    gen_bernoulli,
    gen_gaussian,
    materialize,
    mutual_coherence,
    rotate,
)
from .streams import (
    SparseStream,
    StreamConfig,
    gen_stream,
    mismatch_expectation,
    mismatch_mc,
    window,
)
from .encoder import (
    EncoderState,
    NoiseModel,
    encode_direct,
    encode_first,
    encode_step,
    fourier_coeff_step,
    ortho_coeff_step,
)
from .solvers import (
    LassoProblem,
    SolverReport,
    fista,
    kkt_residual,
    lse_on_support,
    omp,
    soft_threshold,
)
from .pipeline import (
    Emission,
    PipelineConfig,
    StreamingDecoder,
    VoteLedger,
    accepted_support,
    cast_votes,
    detect_support_annihilate,
    detect_support_threshold,
    forgetting_joint_estimate,
    update_averages,
    warm_start,
)
from .metrics import (
    ErrorSummary,
    normalized_error,
    sampling_efficiency,
    sampling_efficiency_limit,
    stream_nev,
    tpr_fpr,
)

__version__ = "0.1.0"
