"""Kalman filter and fixed-interval smoother for the input-feedback model.

The lagged observation ``y_{t-1}`` enters both equations as a known input,
so the state covariances do not depend on the data.  All replicates of a
dataset therefore share one covariance recursion and only the means are
propagated per replicate.  Arrays of state quantities have length T + 1 and
are indexed by time (index 0 is theta_0); innovation arrays have length T
with index t - 1 holding time t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from .errors import DataError, NumericalError

LOG2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class FilterResult:
    """Forward-pass moments.

    Means carry an optional leading replicate axis matching the input;
    covariances are shared by all replicates.
    """

    predicted_mean: np.ndarray  # (..., T+1, k)
    predicted_cov: np.ndarray  # (T+1, k, k)
    filtered_mean: np.ndarray  # (..., T+1, k)
    filtered_cov: np.ndarray  # (T+1, k, k)
    innovation: np.ndarray  # (..., T, p)
    innovation_cov: np.ndarray  # (T, p, p)
    loglik: float | np.ndarray


@dataclass(frozen=True)
class SmoothedMoments:
    """Posterior moments of the states given the whole series.

    ``lag_cov[t]`` is Cov(theta_t, theta_{t-1} | y_{1:T}) for t >= 1;
    ``lag_cov[0]`` is zero and carries no meaning.
    """

    mean: np.ndarray  # (..., T+1, k)
    cov: np.ndarray  # (T+1, k, k)
    lag_cov: np.ndarray  # (T+1, k, k)
    loglik: float | np.ndarray


def _lagged(Y):
    """y_{t-1} for t = 1..T with the convention y_0 = 0."""
    L = np.zeros_like(Y)
    L[..., 1:, :] = Y[..., :-1, :]
    return L


def _check(params, Y):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim not in (2, 3) or Y.shape[-1] != params.p:
        raise DataError(
            f"series of shape {Y.shape} does not match p={params.p} genes"
        )
    return Y


def filter(params, replicate) -> FilterResult:
    """Run the forward recursion.

    Parameters
    ----------
    params : ModelParams
    replicate : array_like
        A (T, p) series, or an (n_R, T, p) stack of independent replicates.

    Raises
    ------
    NumericalError
        If an innovation covariance is not positive definite.
    """
    Y = _check(params, replicate)
    T = Y.shape[-2]
    p, k = params.p, params.k
    F, A, Z, B = params.F, params.A, params.Z, params.B
    R = params.sigma2_xi * np.eye(p)
    Ik = np.eye(k)
    Lag = _lagged(Y)
    batch = Y.shape[:-2]

    a = np.zeros(batch + (T + 1, k))
    m = np.zeros(batch + (T + 1, k))
    P = np.zeros((T + 1, k, k))
    V = np.zeros((T + 1, k, k))
    v = np.zeros(batch + (T, p))
    S = np.zeros((T, p, p))
    P[0] = V[0] = params.Q0_matrix
    ll = np.zeros(batch)

    FT, AT, ZT, BT = F.T, A.T, Z.T, B.T
    pred_in = Lag @ AT  # A y_{t-1}
    obs_in = Y - Lag @ BT  # y_t - B y_{t-1}
    for t in range(1, T + 1):
        Pt = F @ V[t - 1] @ FT + Ik
        Pt = 0.5 * (Pt + Pt.T)
        P[t] = Pt
        at = m[..., t - 1, :] @ FT + pred_in[..., t - 1, :]
        a[..., t, :] = at
        vt = obs_in[..., t - 1, :] - at @ ZT
        v[..., t - 1, :] = vt
        ZP = Z @ Pt
        St = ZP @ ZT + R
        St = 0.5 * (St + St.T)
        S[t - 1] = St
        try:
            Lc = np.linalg.cholesky(St)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"innovation covariance at t={t} is not positive definite"
            ) from exc
        Li = np.linalg.inv(Lc)
        Si = Li.T @ Li
        Kt = (Si @ ZP).T  # P Z' S^{-1}
        m[..., t, :] = at + vt @ Kt.T
        IKZ = Ik - Kt @ Z
        Vt = IKZ @ Pt @ IKZ.T + params.sigma2_xi * (Kt @ Kt.T)
        V[t] = 0.5 * (Vt + Vt.T)
        logdet = 2.0 * np.log(np.diagonal(Lc)).sum()
        quad = np.einsum("...i,ij,...j->...", vt, Si, vt)
        ll = ll - 0.5 * (p * LOG2PI + logdet + quad)

    if not np.all(np.isfinite(ll)):
        raise NumericalError("non-finite log-likelihood")
    a[..., 0, :] = 0.0
    return FilterResult(a, P, m, V, v, S, ll if batch else float(ll))


def smooth(params, replicate, filter_result: FilterResult | None = None) -> SmoothedMoments:
    """Rauch-Tung-Striebel backward pass with lag-one covariances."""
    Y = _check(params, replicate)
    fr = filter(params, Y) if filter_result is None else filter_result
    T = Y.shape[-2]
    k = params.k
    F = params.F
    a, P, m, V = fr.predicted_mean, fr.predicted_cov, fr.filtered_mean, fr.filtered_cov

    ms = np.array(m, copy=True)
    Vs = np.array(V, copy=True)
    lag = np.zeros((T + 1, k, k))
    if k:
        try:
            # J_{t-1} = V_{t-1} F' P_t^{-1}, all t at once (P_t >= I is invertible)
            J = np.swapaxes(np.linalg.solve(P[1:], F @ V[:-1]), -1, -2)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("predicted state covariance is singular") from exc
    else:
        J = np.zeros((T, 0, 0))
    for t in range(T, 0, -1):
        Jt = J[t - 1]
        ms[..., t - 1, :] = m[..., t - 1, :] + (ms[..., t, :] - a[..., t, :]) @ Jt.T
        Vp = V[t - 1] + Jt @ (Vs[t] - P[t]) @ Jt.T
        Vs[t - 1] = 0.5 * (Vp + Vp.T)
        lag[t] = Vs[t] @ Jt.T
    return SmoothedMoments(ms, Vs, lag, fr.loglik)


def marginal_loglik(params, dataset) -> float:
    """Log marginal density of all replicates, summed over replicates."""
    fr = filter(params, dataset.series())
    return float(np.sum(fr.loglik))
