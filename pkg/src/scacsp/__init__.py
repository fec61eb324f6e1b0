"""Spatial filtering for multichannel time-series classification.

Classical CSP, regularized variants, multi-class decompositions, and the
scatter-based scaCSP family over vectorized covariances, with subspace
enhancements, an LDA classifier, cross-validation, synthetic data, and a CLI.
"""

from .classify import (
    CvPlan,
    CvResult,
    LdaModel,
    accuracy,
    cross_validate,
    fold_assignments,
    lda_predict,
    lda_predict_many,
    lda_train,
)
from .csp import (
    FilterBank,
    RegGrid,
    csp_features,
    csp_train,
    multiclass_ovr_predict,
    multiclass_ovr_train,
    multiclass_pw_predict,
    multiclass_pw_train,
    scsp_penalty,
    scsp_train,
    strcsp_train,
    trcsp_train,
)
from .datagen import SynthSpec, generate, oracle_rayleigh_max, oracle_scatter
from .errors import (
    ConfigError,
    DataError,
    DefinitenessError,
    DegenerateClassError,
    NumericalError,
    RankError,
    ScacspError,
    SemiEmptyError,
)
from .linalg import (
    OrthoBasis,
    RankTolerance,
    SymEig,
    gen_sym_eig,
    range_null_bases,
    sym_eig,
    unvec,
    vec,
    whitening_transform,
)
from .preprocess import (
    BandpassSpec,
    CovarianceSet,
    TrialSet,
    butterworth_bandpass,
    center_rows,
    covariances,
    extract_epochs,
    trial_covariance,
)
from .scacsp import (
    DaVector,
    ScatterTriple,
    VecCovSamples,
    feature_projector,
    kron_composite_apply,
    kron_whitener_apply,
    kron_whitener_apply_t,
    scacsp_binary_train,
    scacsp_features,
    scacsp_multi_train,
    scacsp_unwhitened_train,
    scatter_matrices,
    vectorize_covariances,
)
from .subspace import (
    COMPONENT_TAGS,
    SUBSPACE_TAGS,
    GridResult,
    NsrProjector,
    SubspaceSelector,
    empirical_grid,
    extra_filters,
    is_semi_empty,
    nsr_projector,
    reduce_features,
    subspace_basis,
    subspace_dim,
    symmetric_vec_basis,
)

__version__ = "0.1.0"
