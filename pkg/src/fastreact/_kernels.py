"""Compiled inner loops for the tridiagonal implicit step.

Boundary kinds are encoded as ints: 0 = zero flux, 1 = Dirichlet.  ``pl`` and
``pr`` are the potential values at Dirichlet faces (ignored for zero flux).
The discrete operator is (q[i+1/2] - q[i-1/2]) / h with face gradients
q = (P[i+1] - P[i]) / h, and 2 (P[0] - pl) / h at a Dirichlet face.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def face_gradients(P, h, kl, pl, kr, pr):
    n = P.shape[0]
    q = np.empty(n + 1)
    q[0] = 2.0 * (P[0] - pl) / h if kl == 1 else 0.0
    for i in range(1, n):
        q[i] = (P[i] - P[i - 1]) / h
    q[n] = 2.0 * (pr - P[n - 1]) / h if kr == 1 else 0.0
    return q


@njit(cache=True)
def residual(c, c_old, P, a, dt, h, kl, pl, kr, pr):
    """G = c - c_old - dt * div(q) + dt * a * c, plus the two boundary gradients."""
    n = c.shape[0]
    g = np.empty(n)
    r = dt / h
    ql = 2.0 * (P[0] - pl) / h if kl == 1 else 0.0
    q_prev = ql
    for i in range(n):
        if i < n - 1:
            q_next = (P[i + 1] - P[i]) / h
        else:
            q_next = 2.0 * (pr - P[n - 1]) / h if kr == 1 else 0.0
        g[i] = c[i] - c_old[i] - r * (q_next - q_prev) + dt * a[i] * c[i]
        q_prev = q_next
    return g, ql, q_prev


@njit(cache=True)
def solve_linearized(S, a, rhs, dt, h, kl, kr):
    """Solve J x = rhs with J = I + dt*diag(a) + dt/h^2 * L * diag(S).

    L is the (positive) discrete Laplacian; J is an M-matrix, column-diagonally
    dominant, so the Thomas algorithm without pivoting is stable.
    """
    n = S.shape[0]
    r = dt / (h * h)
    lower = np.empty(n)
    diag = np.empty(n)
    upper = np.empty(n)
    for i in range(n):
        wl = 1.0 if i > 0 else (2.0 if kl == 1 else 0.0)
        wr = 1.0 if i < n - 1 else (2.0 if kr == 1 else 0.0)
        diag[i] = 1.0 + dt * a[i] + r * S[i] * (wl + wr)
        lower[i] = -r * S[i - 1] if i > 0 else 0.0
        upper[i] = -r * S[i + 1] if i < n - 1 else 0.0
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x
