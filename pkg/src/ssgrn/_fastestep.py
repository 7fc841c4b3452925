"""Compiled E-step: filter, smoother and state statistics in one pass.

Same recursions as :mod:`ssgrn.kalman`, fused so the EM loop does not pay
Python overhead per time step.  Only used for k >= 1.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _cov_pass(F, Z, s2, Q0, T):
    k = F.shape[0]
    p = Z.shape[0]
    Ik = np.eye(k)
    P = np.zeros((T + 1, k, k))
    V = np.zeros((T + 1, k, k))
    K = np.zeros((T + 1, k, p))
    Si = np.zeros((T + 1, p, p))
    logdet = 0.0
    for i in range(k):
        P[0, i, i] = Q0[i]
        V[0, i, i] = Q0[i]
    for t in range(1, T + 1):
        Pt = F @ V[t - 1] @ F.T + Ik
        Pt = 0.5 * (Pt + Pt.T)
        P[t] = Pt
        ZP = Z @ Pt
        St = ZP @ Z.T
        for i in range(p):
            St[i, i] += s2
        St = 0.5 * (St + St.T)
        L = np.linalg.cholesky(St)
        for i in range(p):
            logdet += 2.0 * np.log(L[i, i])
        Li = np.linalg.inv(L)
        Sit = Li.T @ Li
        Si[t] = Sit
        Kt = (Sit @ ZP).T
        K[t] = Kt
        IKZ = Ik - Kt @ Z
        Vt = IKZ @ Pt @ IKZ.T + s2 * (Kt @ Kt.T)
        V[t] = 0.5 * (Vt + Vt.T)
    J = np.zeros((T + 1, k, k))
    Vs = V.copy()
    lag = np.zeros((T + 1, k, k))
    for t in range(T, 0, -1):
        Jt = np.linalg.solve(P[t], F @ V[t - 1]).T
        J[t] = Jt
        Vp = V[t - 1] + Jt @ (Vs[t] - P[t]) @ Jt.T
        Vs[t - 1] = 0.5 * (Vp + Vp.T)
        lag[t] = Vs[t] @ Jt.T
    return P, V, K, Si, J, Vs, lag, logdet


@njit(cache=True)
def estep_kernel(F, A, Z, B, s2, Q0, Y):
    """Returns (tt, tsum, yt, lt, tp, pp, pl, loglik)."""
    n_R, T, p = Y.shape
    k = F.shape[0]
    P, V, K, Si, J, Vs, lag, logdet = _cov_pass(F, Z, s2, Q0, T)

    tt = np.zeros((k, k))
    tsum = np.zeros(k)
    yt = np.zeros((p, k))
    lt = np.zeros((p, k))
    tp = np.zeros((k, k))
    pp = np.zeros((k, k))
    pl = np.zeros((k, p))
    quad = 0.0

    a = np.zeros((T + 1, k))
    m = np.zeros((T + 1, k))
    ms = np.zeros((T + 1, k))
    v = np.zeros(p)
    w = np.zeros(k)
    for r in range(n_R):
        for i in range(k):
            m[0, i] = 0.0
        for t in range(1, T + 1):
            # a_t = F m_{t-1} + A y_{t-1};  v = y_t - Z a_t - B y_{t-1}
            for i in range(k):
                acc = 0.0
                for j in range(k):
                    acc += F[i, j] * m[t - 1, j]
                if t >= 2:
                    for j in range(p):
                        acc += A[i, j] * Y[r, t - 2, j]
                a[t, i] = acc
            for i in range(p):
                acc = Y[r, t - 1, i]
                for j in range(k):
                    acc -= Z[i, j] * a[t, j]
                if t >= 2:
                    for j in range(p):
                        acc -= B[i, j] * Y[r, t - 2, j]
                v[i] = acc
            for i in range(k):
                acc = a[t, i]
                for j in range(p):
                    acc += K[t, i, j] * v[j]
                m[t, i] = acc
            for i in range(p):
                acc = 0.0
                for j in range(p):
                    acc += Si[t, i, j] * v[j]
                quad += v[i] * acc
        for i in range(k):
            ms[T, i] = m[T, i]
        for t in range(T, 0, -1):
            for i in range(k):
                w[i] = ms[t, i] - a[t, i]
            for i in range(k):
                acc = m[t - 1, i]
                for j in range(k):
                    acc += J[t, i, j] * w[j]
                ms[t - 1, i] = acc
        for t in range(1, T + 1):
            for i in range(k):
                mti = ms[t, i]
                mpi = ms[t - 1, i]
                tsum[i] += mti
                for j in range(k):
                    tt[i, j] += mti * ms[t, j]
                    tp[i, j] += mti * ms[t - 1, j]
                    pp[i, j] += mpi * ms[t - 1, j]
                for j in range(p):
                    yt[j, i] += Y[r, t - 1, j] * mti
                if t >= 2:
                    for j in range(p):
                        yl = Y[r, t - 2, j]
                        lt[j, i] += yl * mti
                        pl[i, j] += mpi * yl

    for t in range(1, T + 1):
        tt += n_R * Vs[t]
        tp += n_R * lag[t]
        pp += n_R * Vs[t - 1]
    loglik = -0.5 * (n_R * T * p * np.log(2.0 * np.pi) + n_R * logdet + quad)
    return tt, tsum, yt, lt, tp, pp, pl, loglik
