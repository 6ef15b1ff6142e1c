"""Minimal dense complex linear-algebra kernel.

Exactly the primitives the alternating solver needs: Cholesky-backed
Hermitian solves, the dominant generalized eigenvector, and Frobenius
norms. Everything operates on plain complex ndarrays; all tolerances are
relative (scaled by trace or norm) so the kernel is unit-agnostic.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite

# Pivot threshold for positive definiteness, relative to trace(A)/dim.
PIVOT_RTOL = 1e-12
# Allowed Hermitian asymmetry, relative to the Frobenius norm.
HERMITIAN_RTOL = 1e-10


def fro_norm(a) -> float:
    """Frobenius norm sqrt(sum |a_ij|^2)."""
    return float(np.linalg.norm(a))


def fro_inner(a, b) -> complex:
    """Frobenius inner product sum conj(a_ij) * b_ij."""
    return complex(np.vdot(a, b))


def _require_hermitian(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    asym = np.linalg.norm(a - a.conj().T)
    if asym > HERMITIAN_RTOL * max(np.linalg.norm(a), np.finfo(float).tiny):
        raise ValueError(f"{name} is not Hermitian within tolerance")
    return a


def cholesky_factor(a: np.ndarray, name: str = "A") -> np.ndarray:
    """Lower factor L with A = L L^H for Hermitian positive definite A.

    Raises NotPositiveDefinite when any pivot is not strictly above
    PIVOT_RTOL * trace(A) / dim, a scale-free definiteness test.
    """
    a = _require_hermitian(a, name)
    n = a.shape[0]
    tol = PIVOT_RTOL * float(np.real(np.trace(a))) / n
    lower = np.zeros_like(a)
    for j in range(n):
        pivot = float(a[j, j].real - np.real(lower[j, :j] @ lower[j, :j].conj()))
        if not pivot > tol:
            raise NotPositiveDefinite(
                f"{name}: pivot {pivot:.3e} at index {j} not above tolerance {tol:.3e}"
            )
        ljj = np.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j].conj()) / ljj
    return lower


def _forward_sub(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L x = b for lower-triangular L."""
    x = np.array(b, dtype=np.complex128)
    for i in range(lower.shape[0]):
        if i:
            x[i] = x[i] - lower[i, :i] @ x[:i]
        x[i] = x[i] / lower[i, i]
    return x


def _backward_sub_h(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L^H x = b for lower-triangular L."""
    n = lower.shape[0]
    x = np.array(b, dtype=np.complex128)
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            x[i] = x[i] - lower[i + 1 :, i].conj() @ x[i + 1 :]
        x[i] = x[i] / lower[i, i].conj()
    return x


def hermitian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for Hermitian positive definite A via Cholesky.

    B may be a vector or a matrix with A's dimension along axis 0; the
    result has B's shape. Raises NotPositiveDefinite when the pivot test
    fails and DimensionMismatch on incompatible shapes.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"B has {b.shape[0]} rows but A has dimension {a.shape[0]}"
        )
    lower = cholesky_factor(a)
    return _backward_sub_h(lower, _forward_sub(lower, b))


def max_generalized_eigvec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unit-norm v maximizing the generalized Rayleigh quotient
    (v^H A v) / (v^H B v) for Hermitian A and positive definite B.

    Uses Cholesky whitening: with B = L L^H the quotient becomes an
    ordinary Rayleigh quotient of C = L^{-1} A L^{-H}, whose top
    eigenvector is computed densely and mapped back through L^{-H}.
    The returned phase is arbitrary.
    """
    a = _require_hermitian(a, "A")
    b = _require_hermitian(b, "B")
    if a.shape != b.shape:
        raise DimensionMismatch(f"A is {a.shape} but B is {b.shape}")
    lower = cholesky_factor(b, name="B")
    s = _forward_sub(lower, a)  # L^{-1} A
    c = _forward_sub(lower, s.conj().T)  # L^{-1} A L^{-H}
    c = 0.5 * (c + c.conj().T)
    _, vecs = np.linalg.eigh(c)
    v = _backward_sub_h(lower, vecs[:, -1])
    return v / np.linalg.norm(v)


def rayleigh_quotient(a: np.ndarray, b: np.ndarray, v: np.ndarray) -> float:
    """Generalized Rayleigh quotient (v^H A v) / (v^H B v)."""
    num = np.vdot(v, np.asarray(a) @ v).real
    den = np.vdot(v, np.asarray(b) @ v).real
    return float(num / den)
