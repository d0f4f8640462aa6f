"""Small tridiagonal helpers shared by the iterative solvers."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded


def assemble_tridiag(cell_coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interior-node stiffness assembly from per-cell coefficients.

    Returns (diag, off) with diag[j] = c[j] + c[j+1] and off[j] = -c[j+1]
    (coupling between interior nodes j and j+1).
    """
    diag = cell_coeffs[:-1] + cell_coeffs[1:]
    off = -cell_coeffs[1:-1]
    return diag, off


def solve_tridiag(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the symmetric tridiagonal system for any float dtype.

    float64 goes through LAPACK; wider dtypes use tridiagonal LU with partial
    pivoting (one superdiagonal of fill-in), which stays stable on the
    indefinite systems arising in the Newton steps. Only exercised in short
    extended-precision polish phases.
    """
    n = diag.size
    if diag.dtype == np.float64:
        ab = np.zeros((3, n))
        ab[0, 1:] = off
        ab[1, :] = diag
        ab[2, :-1] = off
        return solve_banded((1, 1), ab, rhs)
    if n == 1:
        return rhs / diag
    dt = diag.dtype
    a = np.zeros(n, dtype=dt)  # subdiagonal entering row i
    b = diag.astype(dt, copy=True)
    c = np.zeros(n, dtype=dt)  # superdiagonal
    c[:-1] = off
    a[1:] = off
    e = np.zeros(n, dtype=dt)  # second superdiagonal fill-in
    x = np.asarray(rhs, dtype=dt).copy()
    for i in range(n - 1):
        if abs(a[i + 1]) > abs(b[i]):
            # swap rows i and i+1
            b[i], a[i + 1] = a[i + 1], b[i]
            c[i], b[i + 1] = b[i + 1], c[i]
            if i + 2 < n:
                e[i], c[i + 1] = c[i + 1], e[i]
            x[i], x[i + 1] = x[i + 1], x[i]
        if b[i] == 0.0:
            raise ZeroDivisionError("singular tridiagonal system")
        f = a[i + 1] / b[i]
        b[i + 1] -= f * c[i]
        if i + 2 < n:
            c[i + 1] -= f * e[i]
        x[i + 1] -= f * x[i]
    out = np.zeros(n, dtype=dt)
    if b[n - 1] == 0.0:
        raise ZeroDivisionError("singular tridiagonal system")
    out[n - 1] = x[n - 1] / b[n - 1]
    out[n - 2] = (x[n - 2] - c[n - 2] * out[n - 1]) / b[n - 2]
    for i in range(n - 3, -1, -1):
        out[i] = (x[i] - c[i] * out[i + 1] - e[i] * out[i + 2]) / b[i]
    return out
