"""Dense linear-algebra and scalar line-search kernels.

Factorizations and eigen-decompositions are delegated to LAPACK through
numpy/scipy; this module owns the contracts (symmetry checks, error types,
the Cholesky reduction of the generalized problem, and the golden-section
search used by the form-finding line search).
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
import scipy.linalg as sla

SYMMETRY_RTOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class MassMatrixError(np.linalg.LinAlgError):
    pass


class ContractViolation(ValueError):
    pass


class LineSearchError(FloatingPointError):
    def __init__(self, delta: float, value: float):
        self.delta = delta
        self.value = value
        super().__init__(f"line-search objective is {value} at delta={delta!r}")


def _check_symmetric(A: np.ndarray, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"{name} must be square, got {A.shape}")
    scale = max(np.abs(A).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(A - A.T).max(initial=0.0) > SYMMETRY_RTOL * scale:
        raise ContractViolation(f"{name} is not symmetric")
    return A


def solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive-definite ``A`` by Cholesky."""
    A = _check_symmetric(A, "A")
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise ContractViolation(f"dimension mismatch: A is {A.shape}, b is {b.shape}")
    try:
        factor = sla.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite ({exc})") from exc
    return sla.cho_solve(factor, b)


def sym_eig(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    A = _check_symmetric(A, "A")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return w, V


def gen_sym_eig(K: np.ndarray, M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``K phi = lam M phi`` with ``M`` SPD; eigenvectors are M-orthonormal.

    With ``M = L L^T`` the problem becomes the standard symmetric one
    ``L^-1 K L^-T y = lam y`` and ``phi = L^-T y``.
    """
    K = _check_symmetric(K, "K")
    M = _check_symmetric(M, "M")
    if K.shape != M.shape:
        raise ContractViolation(f"K is {K.shape} but M is {M.shape}")
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise MassMatrixError("mass matrix is not positive definite") from exc
    X = sla.solve_triangular(L, K, lower=True)
    S = sla.solve_triangular(L, X.T, lower=True)
    S = 0.5 * (S + S.T)
    w, Y = np.linalg.eigh(S)
    Phi = sla.solve_triangular(L.T, Y, lower=False)
    return w, Phi


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def minimize_scalar(
    f: Callable[[float], float],
    lo: float = 0.0,
    hi: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> tuple[float, float]:
    """Golden-section search for a minimizer of ``f`` on ``[lo, hi]``.

    The upper end point is always evaluated as a candidate, so a function
    still decreasing at ``hi`` returns ``hi``. Raises ``LineSearchError``
    if ``f`` returns a non-finite value.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")

    def g(t):
        v = float(f(t))
        if not math.isfinite(v):
            raise LineSearchError(t, v)
        return v

    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = g(c), g(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = g(d)
    best, fbest = (c, fc) if fc <= fd else (d, fd)
    fhi = g(hi)
    if fhi <= fbest:
        return hi, fhi
    return best, fbest


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 stream; identical seeds give identical streams on every platform."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def uniform(rng: np.random.Generator, lo, hi, size=None) -> np.ndarray:
    """``lo + (hi - lo) * u`` with ``u`` in ``[0, 1)``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return lo + (hi - lo) * rng.random(size)


STAGES = {"dataset": 1, "trials": 2, "train": 3, "split": 4}


def derive_seed(master: int, stage: str) -> int:
    """Stage seed from a master seed (SeedSequence spawn key = stage code)."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(STAGES[stage],))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
