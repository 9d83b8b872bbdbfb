"""bmolab: a numerical laboratory for two-matrix-weighted little BMO theory
on discretized periodic product domains.

Modules follow the pipeline: linalg (Hermitian kernel), grid (dyadic
geometry), weights (sampled fields), reducing (reducing operators), ap
(matrix A_p characteristics), bmo (norm variants and equivalences),
commutator (Riesz transforms and operator-norm experiments), campaign/cli
(reproducible verification runs).
"""

from .ap import ApReport, ap_continuous, ap_dual_check, ap_dyadic, ap_local, ap_slices
from .bmo import (
    BmoReport,
    bmo1_norm,
    bmo2_norm,
    bmo_norm,
    bmo_tilde_norm,
    equivalence_report,
    one_param_bmo_norm,
    slice_sup_norms,
)
from .commutator import (
    OpNormEstimate,
    VectorField,
    averaging_opnorm,
    commutator_apply,
    lower_bound_experiment,
    riesz_apply,
    tensor_riesz_apply,
    tensorize_phi,
    upper_bound_experiment,
    weighted_opnorm,
)
from .grid import GridSpec, Rectangle, children, cover, rectangle_family, shifted_family
from .linalg import column_norm_sum, hermitian_power, op_norm
from .reducing import (
    ReducingOp,
    compare_inverse_prime,
    iterated_reducing,
    reduce_with_mode,
    reducing_exact_p2,
    reducing_john,
    reducing_proxy,
    rho,
)
from .weights import (
    WeightField,
    dual_weight,
    gen_power_weight,
    gen_rotating_weight,
    load_wfld,
    save_wfld,
    slice_field,
)

__version__ = "0.1.0"
