"""Small dense linear-algebra kernel for two-qubit operators.

Complex matrices are plain ``numpy`` arrays. The helpers here add the
validation the rest of the package relies on: Hermiticity checks before
eigendecompositions, PSD clamping for matrix square roots, and a trace of
a product that never forms the product.
"""

import numpy as np

from .errors import DimMismatchError, NotHermitianError, NotPSDError
from .tolerances import HERMITIAN_ATOL, PSD_MIN_EIG

# ============================================================
# Pauli constants
# ============================================================

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

# Index convention used throughout: 1 = sigma_x, 2 = sigma_y, 3 = sigma_z, 4 = identity.
PAULI_BY_INDEX = {1: SIGMA_X, 2: SIGMA_Y, 3: SIGMA_Z, 4: IDENTITY_2}


def _as_matrix(m, name="matrix"):
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimMismatchError(f"{name} must be 2-d, got shape {a.shape}")
    if not np.isfinite(a.view(float)).all():
        raise DimMismatchError(f"{name} has non-finite entries")
    return a


def kron(a, b):
    """Kronecker product of two matrices."""
    return np.kron(_as_matrix(a, "a"), _as_matrix(b, "b"))


def herm_eigvals(m):
    """Eigenvalues of a Hermitian matrix, ascending.

    Raises NotHermitianError if any entry differs from its conjugate
    transpose partner by more than the shared tolerance.
    """
    a = _as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimMismatchError(f"matrix must be square, got shape {a.shape}")
    asym = np.abs(a - a.conj().T).max()
    if asym > HERMITIAN_ATOL:
        raise NotHermitianError(f"asymmetry {asym:.3e} exceeds {HERMITIAN_ATOL:.1e}")
    return np.linalg.eigvalsh(a)


def psd_sqrt(s):
    """Symmetric square root of a real PSD matrix.

    Eigenvalues slightly below zero are rounding noise and are clamped
    to zero; anything below PSD_MIN_EIG is a genuine violation and the
    matrix is rejected.
    """
    a = np.asarray(s, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatchError(f"matrix must be square, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise DimMismatchError("matrix has non-finite entries")
    asym = np.abs(a - a.T).max()
    if asym > HERMITIAN_ATOL:
        raise NotHermitianError(f"asymmetry {asym:.3e} exceeds {HERMITIAN_ATOL:.1e}")
    vals, vecs = np.linalg.eigh(a)
    if vals[0] < PSD_MIN_EIG:
        raise NotPSDError(f"min eigenvalue {vals[0]:.3e} below {PSD_MIN_EIG:.1e}")
    vals = np.clip(vals, 0.0, None)
    root = (vecs * np.sqrt(vals)) @ vecs.T
    return 0.5 * (root + root.T)


def trace_prod(a, b):
    """tr(a @ b) without forming the product."""
    am = _as_matrix(a, "a")
    bm = _as_matrix(b, "b")
    if am.shape[1] != bm.shape[0] or bm.shape[1] != am.shape[0]:
        raise DimMismatchError(f"incompatible shapes {am.shape} and {bm.shape}")
    return complex(np.einsum("ij,ji->", am, bm))
