"""Shared test oracles."""

import numpy as np


def solve_longdouble(a, rhs):
    """Gaussian elimination with partial pivoting in extended precision.

    Keeps the dense hat-matrix oracle accurate a few decades further
    into the stiff end of the lambda grid than float64 allows.
    """
    a = a.astype(np.longdouble).copy()
    rhs = rhs.astype(np.longdouble).copy()
    n = len(a)
    for i in range(n):
        p = i + int(np.argmax(np.abs(a[i:, i])))
        if p != i:
            a[[i, p]] = a[[p, i]]
            rhs[[i, p]] = rhs[[p, i]]
        f = a[i + 1 :, i : i + 1] / a[i, i]
        a[i + 1 :, i:] -= f * a[i, i:]
        rhs[i + 1 :] -= f * rhs[i]
    x = np.zeros_like(rhs)
    for i in range(n - 1, -1, -1):
        x[i] = (rhs[i] - a[i, i + 1 :] @ x[i + 1 :]) / a[i, i]
    return x


def dense_hat_trace(basis_dense, penalty, lam):
    """Brute-force trace of the smoother hat matrix at one lambda."""
    gram = basis_dense.T @ basis_dense
    m = gram + np.longdouble(lam) * (penalty.T @ penalty)
    return float(np.trace(solve_longdouble(m, gram)))
