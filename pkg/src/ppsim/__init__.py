"""Classical-field simulation of entanglement with pseudorandom phase sequences."""

from .gf4 import (
    PpsSet,
    PrimitivePoly,
    build_pps_set,
    default_poly,
    default_pps_set,
    gf4_add,
    gf4_mul,
    lfsr_m_sequence,
    phase_of,
    sequence_orthogonality,
    verify_primitive,
)
from .fields import (
    ClassicalField,
    FieldEnsemble,
    Kind,
    apply_sigma_x,
    extract_rps,
    field_inner_product,
    make_bell,
    make_ensemble,
    make_ghz,
    make_product,
    mode_exchange_pair,
    prepare_field,
)
from .measure import chsh, correlate, correlation_sweep, marginal_correlate, project_unit
from .entropy import (
    assemble_mode_state,
    density_matrix,
    entanglement_report,
    partial_trace,
    von_neumann_entropy,
)

__version__ = "0.1.0"
