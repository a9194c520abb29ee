"""Dense linear algebra and statistics primitives shared by the toolkit.

All routines operate on 64-bit float numpy arrays. A "matrix" here is a
2-D ndarray with finite entries; validation helpers enforce that contract
at the public boundaries so downstream modules can assume clean inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Matrix = np.ndarray


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class SingularMatrixError(ArithmeticError):
    """Raised when a factorization meets a singular or indefinite matrix."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SymEigResult:
    """Spectrum of a symmetric matrix.

    eigenvalues are sorted descending; eigenvectors[:, i] belongs to
    eigenvalues[i] and the column set is orthonormal.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def covariance(X) -> np.ndarray:
    """Sample covariance of the rows of X with denominator m - 1.

    A single row has no spread by convention, so m = 1 yields the zero
    matrix rather than a division by zero.
    """
    X = as_matrix(X, "X")
    m, d = X.shape
    if m == 1:
        return np.zeros((d, d))
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (m - 1)
    return (cov + cov.T) / 2.0


def sym_eigen(A) -> SymEigResult:
    """Full spectrum of a symmetric matrix, eigenvalues descending."""
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"A must be square, got shape {A.shape}")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > 1e-8 * scale:
        raise InvalidInputError("A is not symmetric within tolerance")
    w, V = np.linalg.eigh((A + A.T) / 2.0)
    order = np.argsort(w)[::-1]
    return SymEigResult(eigenvalues=w[order], eigenvectors=V[:, order])


def frobenius_norm(A) -> float:
    """Square root of the sum of squared entries."""
    arr = np.asarray(A, dtype=float)
    return float(np.sqrt((arr * arr).sum()))


def matmul(A, B) -> np.ndarray:
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise InvalidInputError(
            f"shape mismatch for matmul: {A.shape} x {B.shape}")
    return A @ B


def solve_spd(A, b) -> np.ndarray:
    """Solve A x = b for symmetric positive definite A."""
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise InvalidInputError(
            f"shape mismatch for solve: {A.shape} vs {b.shape}")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > 1e-8 * scale:
        raise InvalidInputError("A is not symmetric within tolerance")
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("matrix is not positive definite") from exc
    return np.linalg.solve(A, b)


def mean_rows(X) -> np.ndarray:
    X = as_matrix(X, "X")
    return X.mean(axis=0)
