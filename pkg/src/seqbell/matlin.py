"""Small dense complex matrices: Pauli constants, Kronecker products, PSD roots.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. Every
operator in this package is at most 16x16, so nothing here tries to be clever
about sparsity or batching.
"""

import numpy as np

from .errors import InvalidParam, NotHermitian, NotPSD

DEFAULT_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def as_cmatrix(m):
    """Coerce ``m`` to a finite square complex128 array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParam(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidParam("matrix has non-finite entries")
    return a


def kron(a, b):
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(*ms):
    out = np.ones((1, 1), dtype=complex)
    for m in ms:
        out = np.kron(out, m)
    return out


def dagger(m):
    return np.conj(np.asarray(m, dtype=complex)).T


def matmul(a, b):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[1] != b.shape[0]:
        raise InvalidParam(f"dimension mismatch: {a.shape} @ {b.shape}")
    return a @ b


def trace(m) -> complex:
    return complex(np.trace(m))


def hermiticity_residual(m) -> float:
    m = np.asarray(m, dtype=complex)
    return float(np.max(np.abs(m - dagger(m))))


def is_hermitian(m, tol=DEFAULT_TOL) -> bool:
    return hermiticity_residual(m) <= tol


def eig_hermitian(m, tol=DEFAULT_TOL):
    """Eigenvalues (ascending) and unitary eigenvector columns of a Hermitian matrix.

    Raises NotHermitian when ``max|m - m^dagger| > tol``.
    """
    m = as_cmatrix(m)
    res = hermiticity_residual(m)
    if res > tol:
        raise NotHermitian(f"Hermiticity residual {res:.3e} exceeds tol {tol:.1e}")
    # symmetrize so that residual noise cannot leak into the spectrum
    vals, vecs = np.linalg.eigh(0.5 * (m + dagger(m)))
    return vals, vecs


def is_psd(m, tol=DEFAULT_TOL) -> bool:
    if not is_hermitian(m, tol):
        return False
    vals, _ = eig_hermitian(m, tol)
    return bool(vals[0] >= -tol)


def sqrt_psd(m, tol=DEFAULT_TOL):
    """Principal square root of a Hermitian PSD matrix.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything more negative
    raises NotPSD. Eigenvalues at roundoff scale are also zeroed, since their
    square roots would otherwise inject ~1e-8 noise into projector roots.
    """
    vals, vecs = eig_hermitian(m, tol)
    if vals[0] < -tol:
        raise NotPSD(f"smallest eigenvalue {vals[0]:.3e} below -{tol:.1e}")
    floor = 16 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(vals))))
    roots = np.sqrt(np.where(vals > floor, vals, 0.0))
    s = (vecs * roots) @ dagger(vecs)
    return 0.5 * (s + dagger(s))


def bloch_operator(x, y, z):
    """Return x*SX + y*SY + z*SZ."""
    return x * SX + y * SY + z * SZ
