"""Matrix-free quadratic forms of matrix functions and their parameter
gradients.

The forward value u^T f(A(theta)) u comes from Lanczos quadrature on the
projected tridiagonal matrix; the gradient reuses the same pass, pairing the
projected sensitivity matrix with one derivative contraction per Lanczos
column.  Nothing ever differentiates through the recurrence itself, and the
gradient's error carries the Lanczos residual coefficient as a factor.
"""

from .errors import DiagnosticError, DomainError, NumericalError, ParseError
from .estimators import (
    HamiltonianDataset,
    ProbeConfig,
    SensitivityQuery,
    TraceEstimate,
    bilinear_form,
    bilinear_gradient,
    dense_network_sensitivity,
    generate_hamiltonian_dataset,
    hamiltonian_loss_and_grad,
    hamiltonian_train,
    network_sensitivity,
    trace_estimate,
    trace_gradient,
)
from .gradient import (
    BasisVariationDiagnostic,
    GradientReport,
    ProjectedSensitivity,
    boundary_term_diagnostic,
    commutator_check,
    dense_bilinear_reference,
    dense_quadform_reference,
    dense_value_and_gradient,
    gradient_forward_only,
    gradient_rank_one,
    projected_sensitivity,
    relative_gradient_error,
)
from .io import RunRecord, emit_records, load_edge_list, load_matrix_market, read_records
from .lanczos import LanczosConfig, LanczosFactorization, lanczos_factorize, lanczos_matfun_action
from .operator import (
    DenseSymmetricOperator,
    ParamOperator,
    PauliSumOperator,
    RbfKernelOperator,
    SparseGraphOperator,
    build_pauli_dictionary,
)
from .spectral import (
    EXP,
    IDENTITY,
    INVERSE,
    LOG,
    SQRT,
    SpectralFunction,
    TridiagEigen,
    divided_difference_matrix,
    phase_function,
    quadrature_value,
    resolve_function,
    tridiag_eigen,
)

__version__ = "0.1.0"

__all__ = [
    "BasisVariationDiagnostic",
    "DenseSymmetricOperator",
    "DiagnosticError",
    "DomainError",
    "EXP",
    "GradientReport",
    "HamiltonianDataset",
    "IDENTITY",
    "INVERSE",
    "LOG",
    "LanczosConfig",
    "LanczosFactorization",
    "NumericalError",
    "ParamOperator",
    "ParseError",
    "PauliSumOperator",
    "ProbeConfig",
    "ProjectedSensitivity",
    "RbfKernelOperator",
    "RunRecord",
    "SQRT",
    "SensitivityQuery",
    "SparseGraphOperator",
    "SpectralFunction",
    "TraceEstimate",
    "TridiagEigen",
    "bilinear_form",
    "bilinear_gradient",
    "boundary_term_diagnostic",
    "build_pauli_dictionary",
    "commutator_check",
    "dense_bilinear_reference",
    "dense_network_sensitivity",
    "dense_quadform_reference",
    "dense_value_and_gradient",
    "divided_difference_matrix",
    "emit_records",
    "generate_hamiltonian_dataset",
    "gradient_forward_only",
    "gradient_rank_one",
    "hamiltonian_loss_and_grad",
    "hamiltonian_train",
    "lanczos_factorize",
    "lanczos_matfun_action",
    "load_edge_list",
    "load_matrix_market",
    "network_sensitivity",
    "phase_function",
    "projected_sensitivity",
    "quadrature_value",
    "read_records",
    "relative_gradient_error",
    "resolve_function",
    "trace_estimate",
    "trace_gradient",
    "tridiag_eigen",
]
