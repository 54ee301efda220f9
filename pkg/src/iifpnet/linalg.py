"""Small dense linear algebra helpers.

Vectors and matrices are plain ``float64`` numpy arrays.  The helpers here
add the shape/finiteness checks the rest of the package relies on, plus a
cyclic Jacobi eigensolver for symmetric matrices (the matrices handled in
this package never exceed a few dozen rows).
"""

import numpy as np

from .errors import ContractError

SYMMETRY_TOL = 1e-10
DEFINITE_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    return arr


def as_matrix(m, name="matrix"):
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    return arr


def _square(m, name="matrix"):
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise ContractError(f"{name} must be square, got shape {m.shape}")
    return m


def matvec(m, v):
    """Matrix-vector product with dimension checking."""
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ContractError(
            f"dimension mismatch: matrix has {m.shape[1]} columns, vector has {v.shape[0]} entries"
        )
    return m @ v


def sym_part(m):
    m = _square(m)
    return 0.5 * (m + m.T)


def sym_eigen(m):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    m : array_like, shape (n, n)
        Symmetric matrix (asymmetry above ``1e-10`` is rejected).

    Returns
    -------
    eigenvalues : ndarray, shape (n,)
        Sorted in descending order.
    eigenvectors : ndarray, shape (n, n)
        Orthonormal columns; column ``i`` pairs with ``eigenvalues[i]``.
    """
    a = _square(m).copy()
    n = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a)))) if n else 1.0
    if n and np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise ContractError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    q = np.eye(n)
    tol = JACOBI_TOL * max(1.0, float(np.linalg.norm(a)))

    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum((a - np.diag(np.diag(a))) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if abs(apr) < 1e-300:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/columns p and r
                ap = a[:, p].copy()
                ar = a[:, r].copy()
                a[:, p] = c * ap - s * ar
                a[:, r] = s * ap + c * ar
                ap = a[p, :].copy()
                ar = a[r, :].copy()
                a[p, :] = c * ap - s * ar
                a[r, :] = s * ap + c * ar
                a[p, r] = a[r, p] = 0.0
                qp = q[:, p].copy()
                qr = q[:, r].copy()
                q[:, p] = c * qp - s * qr
                q[:, r] = s * qp + c * qr

    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], q[:, order]


def is_negative_definite(m):
    """True iff every eigenvalue of the symmetric part of ``m`` is below -1e-10."""
    vals, _ = sym_eigen(sym_part(m))
    return bool(vals.size == 0 or vals[0] < -DEFINITE_TOL)


def max_sym_eigenvalue(m):
    """Largest eigenvalue of the symmetric part of ``m`` (LAPACK route).

    Used in inner optimisation loops where the Jacobi solver would dominate
    the runtime.
    """
    return float(np.linalg.eigvalsh(sym_part(m))[-1])
