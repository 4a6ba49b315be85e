"""Desk-scale numerical workload: HPD precondition check plus fixed-point solve.

Run as ``bk-workload`` or ``python -m benchkeeper.workload``. Exit statuses:
0 success, 2 usage/input error, 3 precondition violated, 4 no convergence
within ``max_iter``, 5 numerical breakdown (singular matrix) or output failure.
"""
from .linalg import (
    NotHermitianError,
    NotHPDError,
    NotPositiveDefiniteError,
    SingularMatrixError,
    build_A,
    cholesky_hpd,
    inverse,
    lu_factor,
    lu_solve,
)
from .prng import XorShift64Star
from .solver import (
    PreconditionVerdict,
    WorkloadInput,
    WorkloadResult,
    check_convergence_precondition,
    fixed_point_defect,
    fixed_point_map,
    fixed_point_solve,
    generate_inputs,
    input_from_json,
    input_to_json,
    load_input,
    sample_matrix,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PRECONDITION = 3
EXIT_NO_CONVERGENCE = 4
EXIT_BREAKDOWN = 5
EXIT_CODES = (EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_NO_CONVERGENCE, EXIT_BREAKDOWN)
