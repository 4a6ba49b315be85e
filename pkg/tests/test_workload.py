import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from benchkeeper.workload import (
    EXIT_CODES,
    NotHermitianError,
    NotPositiveDefiniteError,
    SingularMatrixError,
    WorkloadInput,
    XorShift64Star,
    build_A,
    check_convergence_precondition,
    cholesky_hpd,
    fixed_point_defect,
    fixed_point_solve,
    generate_inputs,
    input_from_json,
    input_to_json,
    inverse,
    sample_matrix,
)
from benchkeeper.workload.__main__ import main as workload_main
from oracles import jacobi_eigenvalues, scalar_fixed_point

GOLDEN = (3 - math.sqrt(5)) / 2


def rand_complex(rng, n):
    return rng.uniform(-1, 1, (n, n)) + 1j * rng.uniform(-1, 1, (n, n))


def fro(a):
    return float(np.linalg.norm(a))


def m(*rows):
    return np.array(rows, dtype=complex)


# --------------------------------------------------------------------------- build_A


def test_build_A_cases():
    rng = np.random.default_rng(1)
    S, H = rand_complex(rng, 3), rand_complex(rng, 3)
    assert np.array_equal(build_A(0, S, H), H)
    assert np.array_equal(build_A(1, S, np.zeros((3, 3))), S)
    assert build_A(1j, m([1]), m([2]))[0, 0] == 2 + 1j
    with pytest.raises(ValueError):
        build_A(1, S, np.zeros((2, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_build_A_linearity(n, seed, a, b):
    rng = np.random.default_rng(seed)
    S, H = rand_complex(rng, n), rand_complex(rng, n)
    lhs = build_A(a, S, H) + build_A(b, S, np.zeros_like(S))
    assert np.max(np.abs(lhs - build_A(a + b, S, H))) <= 1e-14 * max(1.0, abs(a) + abs(b))


# --------------------------------------------------------------------------- Cholesky


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_cholesky_identity(n):
    assert np.array_equal(cholesky_hpd(np.eye(n, dtype=complex)), np.eye(n))


def test_cholesky_negative_pivot():
    with pytest.raises(NotPositiveDefiniteError) as err:
        cholesky_hpd(m([1, 0], [0, -1]))
    assert err.value.index == 1
    assert err.value.pivot == -1


def test_cholesky_not_hermitian_is_distinct():
    with pytest.raises(NotHermitianError) as err:
        cholesky_hpd(m([2, 1], [0, 2]))
    assert not isinstance(err.value, NotPositiveDefiniteError)
    assert err.value.index in ((0, 1), (1, 0))


def test_cholesky_recomposition_n8():
    rng = np.random.default_rng(8)
    A = rand_complex(rng, 8)
    M = A.conj().T @ A + np.eye(8)
    L = cholesky_hpd(M)
    assert np.allclose(L, np.tril(L))
    assert fro(L @ L.conj().T - M) <= 1e-10 * fro(M)


def test_cholesky_agrees_with_jacobi_oracle():
    rng = np.random.default_rng(2024)
    verdicts = []
    for _ in range(100):
        n = int(rng.integers(1, 17))
        B = rand_complex(rng, n)
        H = B + B.conj().T + rng.uniform(-2 * n, 4 * n) * np.eye(n)
        lam_min = min(jacobi_eigenvalues(H.tolist()))
        try:
            cholesky_hpd(H)
            ours = True
        except NotPositiveDefiniteError:
            ours = False
        verdicts.append(ours)
        assert ours == (lam_min > 0), (n, lam_min)
    assert 10 < sum(verdicts) < 90  # both verdicts exercised


# --------------------------------------------------------------------------- inverse


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_inverse_residual(n):
    rng = np.random.default_rng(n)
    A = rand_complex(rng, n) + 2 * n * np.eye(n)
    assert fro(A @ inverse(A) - np.eye(n)) <= 1e-10 * n


def test_inverse_needs_pivoting():
    A = m([0, 1], [1, 0])
    assert np.array_equal(inverse(A), A)


def test_inverse_singular():
    with pytest.raises(SingularMatrixError) as err:
        inverse(m([1, 2], [2, 4]))
    assert err.value.column == 1


# --------------------------------------------------------------------------- precondition


@pytest.mark.parametrize("n_theta", [1, 4, 64, 257])
def test_precondition_identity_holds(n_theta):
    v = check_convergence_precondition(np.eye(3, dtype=complex), np.zeros((3, 3), dtype=complex), n_theta)
    assert v.holds


@pytest.mark.parametrize("n_theta", [4, 8, 12, 64, 256])
def test_precondition_analytic_violation_at_quarter_turn(n_theta):
    # M(theta) = 2 cos(theta) vanishes at theta = pi/2
    v = check_convergence_precondition(m([0]), m([1]), n_theta)
    assert not v.holds
    assert v.theta == pytest.approx(math.pi / 2)
    assert v.sample == n_theta // 4
    assert v.index == 0


def test_precondition_violation_off_grid():
    # pi/2 is not on a 6-point grid; 2cos(2pi/3) = -1 is
    v = check_convergence_precondition(m([0]), m([1]), 6)
    assert not v.holds and v.sample == 2


def test_precondition_dimension_mismatch():
    with pytest.raises(ValueError):
        check_convergence_precondition(np.eye(2), np.eye(3), 8)


def test_precondition_seed42_random_matches_dense_oracle():
    inp = generate_inputs(42, 4, "random")
    v = check_convergence_precondition(inp.S1, inp.S2, 64)
    # dense oracle: first sampled angle where M is non-Hermitian or has lambda_min <= 0
    first = None
    for j in range(64):
        M = sample_matrix(inp.S1, inp.S2, 2 * math.pi * j / 64)
        skew = np.linalg.norm(M - M.conj().T)
        if skew > 1e-12 * np.linalg.norm(M) or np.linalg.eigvalsh(M).min() <= 0:
            first = j
            break
    assert first == 0
    assert not v.holds and v.sample == first
    assert "not Hermitian" in v.reason


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.sampled_from([4, 6, 8, 16]))
def test_precondition_violation_persists_when_doubling(seed, n, n_theta):
    rng = np.random.default_rng(seed)
    B, C = rand_complex(rng, n), rand_complex(rng, n)
    S1 = B + B.conj().T + rng.uniform(0, 3 * n) * np.eye(n)
    S2 = 0.5 * C
    v = check_convergence_precondition(S1, S2, n_theta)
    if not v.holds:
        w = check_convergence_precondition(S1, S2, 2 * n_theta)
        assert not w.holds
        assert w.sample <= 2 * v.sample


# --------------------------------------------------------------------------- fixed point


def test_fixed_point_constant_map():
    rng = np.random.default_rng(3)
    A1 = rand_complex(rng, 4) + 4 * np.eye(4)
    res = fixed_point_solve(A1, np.zeros((4, 4), dtype=complex), 1e-10, 10)
    assert res.converged and res.iterations == 1
    assert fro(res.X - inverse(A1)) == 0


def test_fixed_point_scalar_golden_root():
    oracle = scalar_fixed_point(3.0, 1.0)
    assert oracle == pytest.approx(GOLDEN, abs=1e-15)
    res = fixed_point_solve(m([3]), m([1]), 1e-10, 1000)
    assert res.converged
    assert abs(res.X[0, 0] - oracle) <= 1e-10
    assert abs(res.X[0, 0].imag) == 0


def test_fixed_point_marginal_case_does_not_converge():
    # x <- 1/(2 - x) creeps toward x = 1 like (k+1)/(k+2)
    res = fixed_point_solve(m([2]), m([1]), 1e-10, 50)
    assert not res.converged
    assert res.iterations == 50
    x = 0.5
    for _ in range(50):
        prev, x = x, 1 / (2 - x)
    assert res.X[0, 0].real == pytest.approx(x, rel=1e-12)
    assert res.residual == pytest.approx(abs(x - prev) / abs(prev), rel=1e-6)
    assert res.residual > 1e-10


def test_fixed_point_singular_reports_iteration():
    with pytest.raises(SingularMatrixError) as err:
        fixed_point_solve(m([0]), m([1]), 1e-10, 5)
    assert err.value.iteration == 0
    # A1 - A2 X A2^H = 1 - 1 = 0 at the first step
    with pytest.raises(SingularMatrixError) as err:
        fixed_point_solve(m([1]), m([1]), 1e-10, 5)
    assert err.value.iteration == 1


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("n", [1, 4, 9])
def test_converged_residual_bound(seed, n):
    inp = generate_inputs(seed, n, "guaranteed-convergent")
    A1 = build_A(inp.alpha1, inp.S1, inp.H1)
    A2 = build_A(inp.alpha2, inp.S2, inp.H2)
    res = fixed_point_solve(A1, A2, inp.tol, inp.max_iter)
    assert res.converged and res.residual <= inp.tol and res.iterations <= inp.max_iter
    F = inverse(A1 - A2 @ res.X @ A2.conj().T)
    assert fro(res.X - F) <= 2 * inp.tol * fro(res.X)
    assert fixed_point_defect(A1, A2, res.X) <= 2 * inp.tol


# --------------------------------------------------------------------------- inputs


def test_prng_golden_stream():
    # pinned so generated inputs stay reproducible across versions
    r = XorShift64Star(0)
    assert [r.next_u64() for _ in range(3)] == [0x7BBCB40D550682D0, 0xDE7FE413D00CC9FD, 0xB3C638353C668C91]
    u = XorShift64Star(123)
    draws = [u.symmetric() for _ in range(1000)]
    assert all(-1 <= d < 1 for d in draws)


@pytest.mark.parametrize("mode", ["random", "guaranteed-convergent"])
def test_generate_is_deterministic(mode):
    a, b = generate_inputs(11, 5, mode), generate_inputs(11, 5, mode)
    for name in ("S1", "H1", "S2", "H2"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert generate_inputs(12, 5, mode).S1.tobytes() != a.S1.tobytes()


def test_guaranteed_convergent_seed7_holds():
    inp = generate_inputs(7, 4, "guaranteed-convergent")
    assert check_convergence_precondition(inp.S1, inp.S2, 256).holds
    lam = min(np.linalg.eigvalsh(sample_matrix(inp.S1, inp.S2, 2 * math.pi * j / 256)).min() for j in range(256))
    assert lam > 0


def test_generate_rejects_bad_args():
    with pytest.raises(ValueError):
        generate_inputs(1, 0, "random")
    with pytest.raises(ValueError):
        generate_inputs(1, 2, "chaotic")


def test_input_json_round_trip():
    inp = generate_inputs(3, 3, "random")
    inp.alpha1 = 0.5 - 2j
    back = input_from_json(json.loads(json.dumps(input_to_json(inp))))
    for name in ("S1", "H1", "S2", "H2"):
        assert np.array_equal(getattr(back, name), getattr(inp, name))
    assert back.alpha1 == inp.alpha1 and back.seed == 3


@pytest.mark.parametrize(
    "doc",
    [
        {"S1": [[[1, 0]]], "H1": [[[1, 0]]], "S2": [[[0, 0]]]},
        {"S1": [[[1, 0]]], "H1": [[[1, 0]]], "S2": [[[0, 0]]], "H2": [[[0, 0]]], "bogus": 1},
        {"S1": [[1]], "H1": [[[1, 0]]], "S2": [[[0, 0]]], "H2": [[[0, 0]]]},
        {"S1": [[[1, 0], [0, 0]]], "H1": [[[1, 0]]], "S2": [[[0, 0]]], "H2": [[[0, 0]]]},
        {"S1": [[[1, 0]]], "H1": [[[1, 0]], [[1, 0]]], "S2": [[[0, 0]]], "H2": [[[0, 0]]]},
        {"S1": [[[1, 0]]], "H1": [[[1, 0]]], "S2": [[[0, 0]]], "H2": [[[0, 0]]], "tol": 0},
        {"S1": [[[1, 0]]], "H1": [[[1, 0]]], "S2": [[[0, 0]]], "H2": [[[0, 0]]], "tol": [1]},
    ],
)
def test_input_validation(doc):
    with pytest.raises((ValueError, TypeError)):
        input_from_json(doc)


# --------------------------------------------------------------------------- program


def scalar_doc(s1, s2, h1, h2, **extra):
    return {"S1": [[[s1, 0]]], "S2": [[[s2, 0]]], "H1": [[[h1, 0]]], "H2": [[[h2, 0]]], **extra}


def run_main(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    return workload_main(argv)


def test_main_nominal(tmp_path, monkeypatch, capsys):
    assert run_main(tmp_path, monkeypatch, ["--generate", "7", "4", "guaranteed-convergent"]) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert set(metrics) == {"iterations", "residual", "elapsed_seconds", "n"}
    assert metrics["n"] == 4 and metrics["iterations"] >= 1 and metrics["residual"] <= 1e-10
    assert capsys.readouterr().err == ""


def test_main_precondition_violated(tmp_path, monkeypatch, capsys):
    assert run_main(tmp_path, monkeypatch, ["--generate", "42", "4", "random"]) == 3
    assert not (tmp_path / "metrics.json").exists()
    assert len(capsys.readouterr().err.strip().splitlines()) == 1


def test_main_unreadable_input(tmp_path, monkeypatch, capsys):
    assert run_main(tmp_path, monkeypatch, ["--input", str(tmp_path / "missing.json")]) == 2
    assert len(capsys.readouterr().err.strip().splitlines()) == 1


def test_main_marginal_exits_4(tmp_path, monkeypatch, capsys):
    (tmp_path / "in.json").write_text(json.dumps(scalar_doc(1, 0, 2, 1, max_iter=50)))
    assert run_main(tmp_path, monkeypatch, ["--input", "in.json"]) == 4
    assert not (tmp_path / "metrics.json").exists()
    assert "50 iterations" in capsys.readouterr().err


def test_main_flags_override_file(tmp_path, monkeypatch):
    (tmp_path / "in.json").write_text(json.dumps(scalar_doc(1, 0, 3, 1, max_iter=2)))
    assert run_main(tmp_path, monkeypatch, ["--input", "in.json"]) == 4
    assert run_main(tmp_path, monkeypatch, ["--input", "in.json", "--max-iter", "500"]) == 0


def test_main_singular_exits_5(tmp_path, monkeypatch):
    (tmp_path / "in.json").write_text(json.dumps(scalar_doc(1, 0, 0, 1)))
    assert run_main(tmp_path, monkeypatch, ["--input", "in.json"]) == 5


@pytest.mark.parametrize(
    "argv",
    [[], ["--generate", "1", "2"], ["--generate", "x", "2", "random"], ["--generate", "1", "2", "weird"],
     ["--generate", "1", "2", "random", "--tol", "-1"], ["--generate", "1", "0", "random"],
     ["--input", "a", "--generate", "1", "2", "random"], ["--max-iter", "0", "--generate", "1", "2", "random"]],
)
def test_main_usage_errors(tmp_path, monkeypatch, capsys, argv):
    assert run_main(tmp_path, monkeypatch, argv) == 2
    assert len(capsys.readouterr().err.strip().splitlines()) == 1


def test_main_as_subprocess(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "benchkeeper.workload", "--generate", "42", "4", "random"],
        cwd=tmp_path, capture_output=True, text=True,
    )
    assert proc.returncode == 3
    assert proc.stdout == ""


# --------------------------------------------------------------------------- exit-code totality

entry = st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=2)


@st.composite
def fuzzed_docs(draw):
    n = draw(st.integers(1, 3))
    doc = {k: [[draw(entry) for _ in range(n)] for _ in range(n)] for k in ("S1", "S2", "H1", "H2")}
    if draw(st.booleans()):
        doc["max_iter"] = draw(st.integers(1, 30))
    mutation = draw(st.sampled_from(["none", "none", "drop", "garbage", "shape", "hermitian"]))
    if mutation == "drop":
        del doc[draw(st.sampled_from(["S1", "S2", "H1", "H2"]))]
    elif mutation == "garbage":
        key = draw(st.sampled_from(["S1", "tol", "alpha1", "max_iter", "hpd_samples"]))
        doc[key] = draw(st.sampled_from(["x", [1], None, -1, True, {}]))
    elif mutation == "shape":
        doc["H2"] = [[[0, 0]] * (n + 1)] * (n + 1)
    elif mutation == "hermitian":
        # make S1 Hermitian and dominant so later stages are reached
        S = np.array([[complex(*v) for v in row] for row in doc["S1"]])
        S = S + S.conj().T + 8 * np.eye(n)
        doc["S1"] = [[[z.real, z.imag] for z in row] for row in S]
        doc["S2"] = [[[0.1 * a, 0.1 * b] for a, b in row] for row in doc["S2"]]
    return doc


@settings(max_examples=150, deadline=None)
@given(fuzzed_docs())
def test_exit_code_totality(tmp_path_factory, doc):
    d = tmp_path_factory.mktemp("fuzz")
    (d / "in.json").write_text(json.dumps(doc))
    import os

    cwd = os.getcwd()
    os.chdir(d)
    try:
        code = workload_main(["--input", "in.json"])
    finally:
        os.chdir(cwd)
    assert code in EXIT_CODES
    assert (code == 0) == (d / "metrics.json").exists()


def test_workload_input_invariants():
    with pytest.raises(ValueError):
        WorkloadInput(np.eye(2), np.eye(2), np.eye(3), np.eye(2))
