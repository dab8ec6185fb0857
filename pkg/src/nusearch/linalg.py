"""Small dense complex linear algebra helpers.

Matrices and vectors are plain ``numpy`` arrays of dtype ``complex128``.
Qubit indexing is big-endian throughout the package: qubit 0 is the most
significant bit of a basis-state index (the top wire of a circuit drawing).
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

# Desk-scale register limits.
MAX_INDEX_QUBITS = 14
MAX_AUX_QUBITS = 4
MAX_TOTAL_QUBITS = MAX_INDEX_QUBITS + MAX_AUX_QUBITS

EIG_TOL = 1e-12

H1 = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


class SizeLimitError(ValueError):
    """Raised when an operation would exceed the configured register size."""


class EigenvalueRangeError(ValueError):
    """Raised when an eigenvalue lies outside [-1, 1] (missing scaling)."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _check_dim(dim: int) -> None:
    if dim > 2**MAX_TOTAL_QUBITS:
        raise SizeLimitError(
            f"dimension {dim} exceeds 2**{MAX_TOTAL_QUBITS}; desk-scale limit exceeded"
        )


def identity(dim: int) -> np.ndarray:
    _check_dim(dim)
    return np.eye(dim, dtype=complex)


def kron(a, b) -> np.ndarray:
    """Tensor product ``a ⊗ b``."""
    a, b = as_matrix(a), as_matrix(b)
    _check_dim(a.shape[0] * b.shape[0])
    _check_dim(a.shape[1] * b.shape[1])
    return np.kron(a, b)


def kron_all(mats: Sequence) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = kron(out, m)
    return out


def hadamard_basis(k: int) -> np.ndarray:
    """Return ``H^{⊗k}`` with ``H = [[1, 1], [1, -1]] / sqrt(2)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > MAX_TOTAL_QUBITS:
        raise SizeLimitError(f"k={k} exceeds {MAX_TOTAL_QUBITS} qubits")
    return kron_all([H1] * k)


def dagger(a) -> np.ndarray:
    return np.conj(as_matrix(a)).T


def _clamped_eigvals(eigvals: Sequence[float]) -> np.ndarray:
    lam = np.asarray(eigvals, dtype=float)
    if np.any(np.abs(lam) > 1 + EIG_TOL):
        bad = lam[np.abs(lam) > 1 + EIG_TOL]
        raise EigenvalueRangeError(
            f"eigenvalues {bad.tolist()} outside [-1, 1]; increase the scaling constant"
        )
    return np.clip(lam, -1.0, 1.0)


def in_basis(eigvals: Sequence[float], basis) -> np.ndarray:
    """``basis · diag(eigvals) · basisᵀ`` for an orthogonal ``basis``."""
    basis = as_matrix(basis)
    lam = np.asarray(eigvals, dtype=complex)
    if lam.shape != (basis.shape[1],):
        raise ValueError("need one eigenvalue per basis column")
    return (basis * lam) @ basis.T


def sqrt_complement_in_basis(eigvals: Sequence[float], basis) -> np.ndarray:
    """The sine block ``basis · diag(sqrt(1 - λ²)) · basisᵀ``.

    Eigenvalues are clamped to [-1, 1] after a 1e-12 tolerance check so that
    a value of exactly 1 up to rounding does not turn into NaN.
    """
    lam = _clamped_eigvals(eigvals)
    return in_basis(np.sqrt(1.0 - lam**2), basis)


def max_abs_diff(a, b) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def is_unitary(u, atol: float = 1e-10) -> bool:
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        return False
    return max_abs_diff(dagger(u) @ u, np.eye(u.shape[0])) <= atol


def unitarity_error(u) -> float:
    u = as_matrix(u)
    return max_abs_diff(dagger(u) @ u, np.eye(u.shape[0]))
