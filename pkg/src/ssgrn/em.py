"""Maximum-likelihood estimation of F, A, Z, B and sigma2_xi by EM.

The E-step runs the Kalman smoother on every replicate and accumulates
expected cross-products; the M-step solves the two block normal equations
(observation pair Z, B and state pair F, A) in closed form using full
second moments E[theta theta'] = V + E[theta] E[theta]'.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import linalg

from . import _fastestep, kalman
from .datamodel import SIGMA2_FLOOR, ModelParams
from .errors import DataError, InfeasibleError, NumericalError

logger = logging.getLogger(__name__)

LOG2PI = np.log(2.0 * np.pi)
MONOTONE_SLACK = 1e-8


@dataclass(frozen=True)
class SufficientStats:
    """Expected sums over replicates r and times t = 1..T.

    ``t`` is theta_t, ``p`` is theta_{t-1} (previous state), ``y`` is y_t and
    ``l`` is the lagged observation y_{t-1}.  So ``lt`` is
    sum y_{t-1} E[theta_t]' and ``tp`` is sum E[theta_t theta_{t-1}'].
    """

    tt: np.ndarray  # k x k
    t: np.ndarray  # k
    yt: np.ndarray  # p x k
    lt: np.ndarray  # p x k
    yl: np.ndarray  # p x p
    ll: np.ndarray  # p x p
    yy: np.ndarray  # p x p
    tp: np.ndarray  # k x k
    pp: np.ndarray  # k x k
    pl: np.ndarray  # k x p
    count: int

    @property
    def tl(self) -> np.ndarray:
        """sum E[theta_t] y_{t-1}'."""
        return self.lt.T

    @property
    def p_dim(self) -> int:
        return self.yy.shape[0]

    @property
    def k_dim(self) -> int:
        return self.tt.shape[0]

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        return SufficientStats(
            **{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)}
        )

    def observation_gram(self):
        """Gram matrix of the regressors (theta_t, y_{t-1}) and the cross term with y_t."""
        return _gram(self.tt, self.lt.T, self.ll), np.concatenate([self.yt, self.yl], axis=1)

    def state_gram(self):
        """Gram matrix of the regressors (theta_{t-1}, y_{t-1}) and the cross term with theta_t."""
        return _gram(self.pp, self.pl, self.ll), np.concatenate([self.tp, self.lt.T], axis=1)


def _gram(top_left, top_right, bottom_right):
    k, p = top_right.shape
    g = np.empty((k + p, k + p))
    g[:k, :k] = top_left
    g[:k, k:] = top_right
    g[k:, :k] = top_right.T
    g[k:, k:] = bottom_right
    return g


@dataclass(frozen=True)
class FitConfig:
    max_iter: int = 500
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise DataError("max_iter must be >= 1")
        if not self.tol > 0:
            raise DataError("tol must be positive")


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    loglik_trace: tuple
    iterations: int
    converged: bool

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]


def lag_regression(dataset):
    """Pooled least-squares regression of y_t on y_{t-1} over t = 2..T.

    Returns
    -------
    B : ndarray (p, p)
    sigma2 : float
        Mean over genes of the unbiased residual variance, floored.
    """
    Y = dataset.series()
    n_R, T, p = Y.shape
    if T < 2:
        raise DataError("lag regression needs at least 2 time points")
    X = Y[:, :-1, :].reshape(-1, p)
    Yc = Y[:, 1:, :].reshape(-1, p)
    n = X.shape[0]
    gram = X.T @ X
    if np.linalg.matrix_rank(gram) < p:
        raise NumericalError("lag regression is singular: lagged genes are collinear")
    B = linalg.solve(gram, X.T @ Yc, assume_a="pos").T
    resid = Yc - X @ B.T
    dof = n - p if n > p else n
    sigma2 = float(np.mean(np.sum(resid**2, axis=0) / dof))
    return B, max(sigma2, SIGMA2_FLOOR)


def init(dataset, k: int, Q0=None) -> ModelParams:
    """Starting point: F = I, Z = rectangular identity, A = 0, B and sigma2 from lag regression."""
    dims = dataset.dims.with_k(k)
    if not dims.feasible:
        raise InfeasibleError(f"k={k} needs more observations than p*T*n_R={dims.n_obs}")
    B, sigma2 = lag_regression(dataset)
    p = dataset.p
    return ModelParams(
        F=np.eye(k),
        A=np.zeros((k, p)),
        Z=np.eye(p, k),
        B=B,
        sigma2_xi=sigma2,
        Q0=Q0,
    )


def estep(params: ModelParams, dataset, compiled: bool = True, _data=None):
    """Smooth every replicate and accumulate sufficient statistics.

    With ``compiled`` (the default) the fused numba kernel is used for
    k >= 1; otherwise the statistics come from :func:`kalman.smooth`.

    Returns
    -------
    stats : SufficientStats
    loglik : float
        Marginal log-likelihood at ``params``.
    """
    Y = dataset.series() if _data is None else _data[0]
    if compiled and params.k > 0:
        return _compiled_estep(params, Y, _data)
    sm = kalman.smooth(params, Y)
    return _accumulate(Y, sm), float(np.sum(sm.loglik))


def _data_stats(Y):
    L = kalman._lagged(Y)
    return (
        Y,
        np.einsum("rti,rtj->ij", Y, L),
        np.einsum("rti,rtj->ij", L, L),
        np.einsum("rti,rtj->ij", Y, Y),
    )


def _compiled_estep(params, Y, data=None):
    try:
        tt, t, yt, lt, tp, pp, pl, ll = _fastestep.estep_kernel(
            params.F, params.A, params.Z, params.B, params.sigma2_xi, params.Q0, Y
        )
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Kalman recursion failed: {exc}") from exc
    if not np.isfinite(ll):
        raise NumericalError("non-finite log-likelihood")
    _, yl, lagl, yy = _data_stats(Y) if data is None else data
    stats = SufficientStats(tt=tt, t=t, yt=yt, lt=lt, yl=yl, ll=lagl, yy=yy,
                            tp=tp, pp=pp, pl=pl, count=Y.shape[0] * Y.shape[1])
    return stats, float(ll)


def _accumulate(Y, sm) -> SufficientStats:
    n_R, T, p = Y.shape
    L = kalman._lagged(Y)
    Mt = sm.mean[:, 1:, :]
    Mp = sm.mean[:, :-1, :]
    return SufficientStats(
        tt=np.einsum("rti,rtj->ij", Mt, Mt) + n_R * sm.cov[1:].sum(axis=0),
        t=Mt.sum(axis=(0, 1)),
        yt=np.einsum("rti,rtj->ij", Y, Mt),
        lt=np.einsum("rti,rtj->ij", L, Mt),
        yl=np.einsum("rti,rtj->ij", Y, L),
        ll=np.einsum("rti,rtj->ij", L, L),
        yy=np.einsum("rti,rtj->ij", Y, Y),
        tp=np.einsum("rti,rtj->ij", Mt, Mp) + n_R * sm.lag_cov[1:].sum(axis=0),
        pp=np.einsum("rti,rtj->ij", Mp, Mp) + n_R * sm.cov[:-1].sum(axis=0),
        pl=np.einsum("rti,rtj->ij", Mp, L),
        count=n_R * T,
    )


def _solve_normal(gram, cross, what):
    if gram.shape[0] == 0:
        return np.zeros((cross.shape[0], 0))
    try:
        cf = linalg.cho_factor(gram, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"{what} Gram matrix is singular") from exc
    d = np.diag(cf[0])
    if d.min() <= 1e-12 * d.max():
        raise NumericalError(f"{what} Gram matrix is numerically singular")
    return linalg.cho_solve(cf, cross.T, check_finite=False).T


def observation_rss(stats: SufficientStats, Z, B) -> float:
    """Expected residual sum of squares of the observation equation."""
    W = np.hstack([Z, B])
    gram, cross = stats.observation_gram()
    return float(np.trace(stats.yy) - 2.0 * np.sum(W * cross) + np.sum(W * (W @ gram)))


def state_rss(stats: SufficientStats, F, A) -> float:
    """Expected residual sum of squares of the state equation (unit noise)."""
    W = np.hstack([F, A])
    gram, cross = stats.state_gram()
    return float(np.trace(stats.tt) - 2.0 * np.sum(W * cross) + np.sum(W * (W @ gram)))


def mstep(stats: SufficientStats, Q0=None) -> ModelParams:
    """Closed-form maximiser of the expected complete-data log-likelihood.

    Raises
    ------
    NumericalError
        If either block Gram matrix is singular.  No regularisation is applied.
    """
    p, k = stats.p_dim, stats.k_dim
    WZB = _solve_normal(*stats.observation_gram(), "observation")
    Z, B = WZB[:, :k], WZB[:, k:]
    WFA = _solve_normal(*stats.state_gram(), "state")
    F, A = WFA[:, :k], WFA[:, k:]
    sigma2 = observation_rss(stats, Z, B) / (p * stats.count)
    return ModelParams(F=F, A=A, Z=Z, B=B, sigma2_xi=max(sigma2, SIGMA2_FLOOR), Q0=Q0)


def expected_complete_loglik(params: ModelParams, stats: SufficientStats) -> float:
    """Q(params | params*) for the statistics gathered at params*.

    Terms that do not depend on (F, A, Z, B, sigma2_xi), namely the theta_0
    prior, are dropped.
    """
    p, k, n = params.p, params.k, stats.count
    s2 = params.sigma2_xi
    obs = -0.5 * (p * n * (LOG2PI + np.log(s2)) + observation_rss(stats, params.Z, params.B) / s2)
    state = -0.5 * (k * n * LOG2PI + state_rss(stats, params.F, params.A))
    return float(obs + state)


def fit(dataset, k: int, config: FitConfig | None = None, Q0=None, start: ModelParams | None = None) -> FitResult:
    """Run EM from :func:`init` until the relative log-likelihood change drops below ``tol``.

    Initialisation is deterministic, so ``config.seed`` does not influence the result.

    Raises
    ------
    NumericalError
        If the log-likelihood decreases by more than 1e-8 (an M-step defect)
        or a matrix becomes singular.
    """
    config = config or FitConfig()
    params = init(dataset, k, Q0=Q0) if start is None else start
    data = _data_stats(dataset.series())
    stats, ll = estep(params, dataset, _data=data)
    trace = [ll]
    converged = False
    it = 0
    while it < config.max_iter:
        it += 1
        params = mstep(stats, Q0=params.Q0)
        stats, ll = estep(params, dataset, _data=data)
        prev = trace[-1]
        trace.append(ll)
        if ll < prev - MONOTONE_SLACK:
            raise NumericalError(
                f"EM log-likelihood decreased at iteration {it}: {prev!r} -> {ll!r}"
            )
        if abs(ll - prev) < config.tol * (1.0 + abs(ll)):
            converged = True
            break
    logger.debug("EM k=%d: %d iterations, loglik %.6f, converged=%s", k, it, ll, converged)
    return FitResult(params, tuple(trace), it, converged)
