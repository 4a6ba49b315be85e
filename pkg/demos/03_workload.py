"""
The fixed-point workload
========================

The workload builds A_i = alpha_i S_i + H_i, checks that
e^{i theta} S2 + S1 + e^{-i theta} S2^H is Hermitian positive definite on a grid
of theta, and only then iterates X <- (A1 - A2 X A2^H)^{-1}. The iteration
count is part of the result; a run that does not converge is an error, not a
quiet success.
"""
import numpy as np

from benchkeeper.workload import (
    build_A,
    check_convergence_precondition,
    fixed_point_defect,
    fixed_point_solve,
    generate_inputs,
)

# randomly drawn matrices almost never satisfy the precondition
bad = generate_inputs(42, 4, "random")
v = check_convergence_precondition(bad.S1, bad.S2, bad.hpd_samples)
print(f"random seed 42: holds={v.holds} at theta={v.theta:.3f} ({v.reason})")

# the guaranteed-convergent generator makes S1 strongly diagonally dominant
good = generate_inputs(7, 4, "guaranteed-convergent")
print("guaranteed-convergent seed 7:", check_convergence_precondition(good.S1, good.S2, 256).holds)

A1, A2 = build_A(good.alpha1, good.S1, good.H1), build_A(good.alpha2, good.S2, good.H2)
res = fixed_point_solve(A1, A2, good.tol, good.max_iter)
print(f"converged={res.converged} after {res.iterations} iterations, residual {res.residual:.2e}")
print(f"fixed-point defect {fixed_point_defect(A1, A2, res.X):.2e}")

# scalar case: x = 1/(3 - x) has the root (3 - sqrt 5)/2
res = fixed_point_solve(np.array([[3.0]]), np.array([[1.0]]), 1e-14, 1000)
print(f"scalar root {res.X[0, 0].real:.12f} vs {(3 - np.sqrt(5)) / 2:.12f}")

# a marginal map (derivative 1 at the fixed point) creeps towards x = 1
res = fixed_point_solve(np.array([[2.0]]), np.array([[1.0]]), 1e-10, 50)
print(f"marginal case: converged={res.converged}, x={res.X[0, 0].real:.4f} after {res.iterations} steps")
