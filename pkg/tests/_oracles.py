"""Independent numerical oracles used to freeze expected test values.

Each helper is deliberately implemented from first principles (truncated
series, finite differences, Kronecker linear solves, adaptive quadrature)
so it shares no code path with the library routines it checks.
"""

import math

import numpy as np
import scipy.integrate


def series_expm(M: np.ndarray, tol: float = 1e-16) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring of the Taylor series."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    norm = float(np.abs(M).sum(axis=1).max())
    s = 0
    while norm / (2**s) > 0.5:
        s += 1
    A = M / (2**s)
    out = np.eye(n)
    term = np.eye(n)
    for order in range(1, 80):
        term = term @ A / order
        out = out + term
        if np.abs(term).max() < tol * max(1.0, np.abs(out).max()):
            break
    for _ in range(s):
        out = out @ out
    return out


def fd_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def fd_jacobian(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    J = np.zeros((f0.size, x.size))
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * h)
    return J


def quad_convolution_cov(A: np.ndarray, C: np.ndarray, t: float) -> np.ndarray:
    """integral_0^t e^{As} C C^T e^{A^T s} ds entry by entry with quad."""
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    n = A.shape[0]
    Q = C @ C.T
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            def integrand(s, i=i, j=j):
                E = series_expm(A * s)
                return float((E @ Q @ E.T)[i, j])

            val, _ = scipy.integrate.quad(integrand, 0.0, t, limit=200)
            out[i, j] = out[j, i] = val
    return out


def lyapunov_kron(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve A S + S A^T + Q = 0 by the Kronecker linear system."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    lhs = np.kron(np.eye(n), A) + np.kron(A, np.eye(n))
    vec = np.linalg.solve(lhs, -Q.flatten(order="F"))
    S = vec.reshape((n, n), order="F")
    S = 0.5 * (S + S.T)
    resid = np.abs(A @ S + S @ A.T + Q).max()
    assert resid < 1e-8 * max(1.0, np.abs(Q).max()), f"oracle residual {resid}"
    return S


def scalar_ou_var(gamma: float, beta: float, t: float) -> float:
    """Variance at time t of dp = -gamma p dt + sqrt(2 gamma / beta) dW, p0=0."""
    return (1.0 - math.exp(-2.0 * gamma * t)) / beta
