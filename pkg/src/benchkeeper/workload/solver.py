"""Boundary-condition iteration and its convergence precondition."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import (
    NotHermitianError,
    NotHPDError,
    SingularMatrixError,
    as_matrix,
    build_A,
    cholesky_hpd,
    frob,
    inverse,
)
from .prng import XorShift64Star

MODES = ("random", "guaranteed-convergent")


@dataclass
class WorkloadInput:
    S1: np.ndarray
    H1: np.ndarray
    S2: np.ndarray
    H2: np.ndarray
    alpha1: complex = 0j
    alpha2: complex = 0j
    tol: float = 1e-10
    max_iter: int = 1000
    hpd_samples: int = 64
    seed: int | None = None

    def __post_init__(self):
        shapes = {m.shape for m in (self.S1, self.H1, self.S2, self.H2)}
        if len(shapes) != 1:
            raise ValueError(f"matrix dimensions disagree: {sorted(shapes)}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.hpd_samples < 1:
            raise ValueError("max_iter and hpd_samples must be positive")

    @property
    def n(self) -> int:
        return self.S1.shape[0]


@dataclass
class WorkloadResult:
    iterations: int
    converged: bool
    residual: float
    X: np.ndarray
    elapsed_seconds: float


@dataclass
class PreconditionVerdict:
    holds: bool
    theta: float | None = None
    sample: int | None = None
    reason: str = ""
    index: int | None = None  # offending pivot (not-PD) or None
    pivot: float | None = None

    def __bool__(self) -> bool:
        return self.holds


def sample_matrix(S1: np.ndarray, S2: np.ndarray, theta: float) -> np.ndarray:
    """``z*S2 + S1 + conj(z)*S2^H`` for ``z = exp(i*theta)``."""
    z = complex(math.cos(theta), math.sin(theta))
    return z * S2 + S1 + z.conjugate() * S2.conj().T


def check_convergence_precondition(
    S1: np.ndarray, S2: np.ndarray, n_theta: int = 64, tol_h: float = 1e-12
) -> PreconditionVerdict:
    """Check HPD-ness of the unit-circle family on ``n_theta`` equispaced angles.

    Passing is necessary, not sufficient: only sampled angles are checked.
    """
    if S1.shape != S2.shape:
        raise ValueError(f"dimension mismatch: S1 {S1.shape} vs S2 {S2.shape}")
    if n_theta < 1:
        raise ValueError("n_theta must be >= 1")
    # pivots are judged against the size of the whole family
    scale = frob(S1) + 2.0 * frob(S2)
    for j in range(n_theta):
        theta = 2.0 * math.pi * (j / n_theta)
        try:
            cholesky_hpd(sample_matrix(S1, S2, theta), tol_h=tol_h, scale=scale)
        except NotHermitianError as exc:
            return PreconditionVerdict(False, theta, j, str(exc))
        except NotHPDError as exc:
            return PreconditionVerdict(False, theta, j, str(exc), exc.index, exc.pivot)
    return PreconditionVerdict(True)


def fixed_point_defect(A1: np.ndarray, A2: np.ndarray, X: np.ndarray) -> float:
    """``||X - map(X)||_F / ||X||_F``; at most ``2*tol`` for a converged X."""
    return frob(X - fixed_point_map(A1, A2, X)) / frob(X)


def fixed_point_map(A1: np.ndarray, A2: np.ndarray, X: np.ndarray) -> np.ndarray:
    return inverse(A1 - A2 @ X @ A2.conj().T)


def fixed_point_solve(A1: np.ndarray, A2: np.ndarray, tol: float = 1e-10, max_iter: int = 1000) -> WorkloadResult:
    """Iterate ``X <- (A1 - A2 X A2^H)^-1`` from ``X0 = A1^-1``.

    Stops once the relative update is at most ``tol``. ``iterations`` counts map
    applications, so a constant map converges at 1.
    """
    start = time.perf_counter()
    try:
        X = inverse(A1)
    except SingularMatrixError as exc:
        raise SingularMatrixError(exc.column, exc.pivot, 0) from None
    residual = math.inf
    k = 0
    while k < max_iter:
        k += 1
        try:
            X_next = fixed_point_map(A1, A2, X)
        except SingularMatrixError as exc:
            raise SingularMatrixError(exc.column, exc.pivot, k) from None
        norm_x = frob(X)
        residual = frob(X_next - X) / norm_x if norm_x > 0 else frob(X_next - X)
        X = X_next
        if residual <= tol:
            return WorkloadResult(k, True, residual, X, time.perf_counter() - start)
    return WorkloadResult(k, False, residual, X, time.perf_counter() - start)


# --------------------------------------------------------------------------- inputs


def _hpd_block(rng: XorShift64Star, n: int) -> np.ndarray:
    # c*I + B + B^H with c = 2||B||_F + 1 has smallest eigenvalue >= 1
    B = np.array(rng.complex_matrix(n))
    c = 2.0 * frob(B) + 1.0
    return c * np.eye(n) + B + B.conj().T


def _small_block(rng: XorShift64Star, n: int, target: float = 0.25) -> np.ndarray:
    C = np.array(rng.complex_matrix(n))
    norm = frob(C)
    return C * (target / norm) if norm > 0 else C


def generate_inputs(seed: int, n: int, mode: str) -> WorkloadInput:
    """Deterministic inputs for ``(seed, n, mode)``.

    ``random`` draws S1, H1, S2, H2 (in that order, row-major, real part before
    imaginary part) uniformly from [-1, 1). ``guaranteed-convergent`` builds
    S1, H1 with smallest eigenvalue >= 1 and S2, H2 with Frobenius norm 0.25,
    so the sampled family stays HPD (1 - 2*0.25 > 0) and the iteration map is
    a contraction on A1 = H1, A2 = H2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    rng = XorShift64Star(seed)
    if mode == "random":
        S1, H1, S2, H2 = (np.array(rng.complex_matrix(n)) for _ in range(4))
    else:
        S1 = _hpd_block(rng, n)
        H1 = _hpd_block(rng, n)
        S2 = _small_block(rng, n)
        H2 = _small_block(rng, n)
    return WorkloadInput(S1, H1, S2, H2, seed=seed)


def _encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_complex(v) -> complex:
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
        raise ValueError(f"complex numbers are [re, im] pairs, got {v!r}")
    return complex(v[0], v[1])


def _decode_matrix(rows, name: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValueError(f"{name} must be a non-empty array of rows")
    return as_matrix([[_decode_complex(v) for v in row] for row in rows])


def input_to_json(inp: WorkloadInput) -> dict:
    doc = {
        "S1": _encode_matrix(inp.S1),
        "H1": _encode_matrix(inp.H1),
        "S2": _encode_matrix(inp.S2),
        "H2": _encode_matrix(inp.H2),
        "alpha1": [inp.alpha1.real, inp.alpha1.imag],
        "alpha2": [inp.alpha2.real, inp.alpha2.imag],
        "tol": inp.tol,
        "max_iter": inp.max_iter,
        "hpd_samples": inp.hpd_samples,
    }
    if inp.seed is not None:
        doc["seed"] = inp.seed
    return doc


def input_from_json(doc: dict) -> WorkloadInput:
    if not isinstance(doc, dict):
        raise ValueError("input document must be a JSON object")
    known = {"S1", "H1", "S2", "H2", "alpha1", "alpha2", "tol", "max_iter", "hpd_samples", "seed"}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown input keys: {sorted(unknown)}")
    missing = {"S1", "H1", "S2", "H2"} - set(doc)
    if missing:
        raise ValueError(f"missing input keys: {sorted(missing)}")
    kwargs = {name: _decode_matrix(doc[name], name) for name in ("S1", "H1", "S2", "H2")}
    for name in ("alpha1", "alpha2"):
        if name in doc:
            kwargs[name] = _decode_complex(doc[name])
    if "tol" in doc:
        kwargs["tol"] = float(doc["tol"])
    for name in ("max_iter", "hpd_samples", "seed"):
        if name in doc:
            if not isinstance(doc[name], int) or isinstance(doc[name], bool):
                raise ValueError(f"{name} must be an integer")
            kwargs[name] = doc[name]
    return WorkloadInput(**kwargs)


def load_input(path: str | Path) -> WorkloadInput:
    with open(path, encoding="utf-8") as fh:
        return input_from_json(json.load(fh))
