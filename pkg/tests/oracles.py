"""Independent reference computations used by the tests.

Nothing here calls the Kalman recursions: the joint law of
(theta_0..theta_T, y_1..y_T) is written down as one big Gaussian and
conditioned directly.
"""

import numpy as np
from scipy import stats

from ssgrn.datamodel import ModelParams


def random_params(rng, p, k, scale=0.5, sigma2=None):
    return ModelParams(
        F=scale * rng.standard_normal((k, k)),
        A=scale * rng.standard_normal((k, p)),
        Z=rng.standard_normal((p, k)),
        B=scale * rng.standard_normal((p, p)),
        sigma2_xi=rng.uniform(0.2, 2.0) if sigma2 is None else sigma2,
        Q0=rng.uniform(0.5, 2.0, size=k),
    )


def joint_gaussian(params, y):
    """Mean and covariance of (theta_0..theta_T) stacked over y_1..y_T.

    The lagged observations are data, so the model is linear-Gaussian in
    the noise vector e = (theta_0, eta_1..eta_T, xi_1..xi_T) once the
    observed y_{t-1} are plugged in as inputs.
    """
    y = np.asarray(y, float)
    T, p = y.shape
    k = params.k
    F, A, Z, B = params.F, params.A, params.Z, params.B
    ne = k + T * k + T * p
    # state_t = c_t + S_t e ; y_t = d_t + O_t e
    S = [np.zeros((k, ne))]
    S[0][:, :k] = np.eye(k)
    c = [np.zeros(k)]
    O, d = [], []
    ylag = np.zeros(p)
    for t in range(1, T + 1):
        St = F @ S[-1]
        St[:, k + (t - 1) * k: k + t * k] += np.eye(k)
        ct = F @ c[-1] + A @ ylag
        Ot = Z @ St
        off = k + T * k + (t - 1) * p
        Ot[:, off: off + p] += np.eye(p)
        dt = Z @ ct + B @ ylag
        S.append(St)
        c.append(ct)
        O.append(Ot)
        d.append(dt)
        ylag = y[t - 1]
    noise_var = np.concatenate(
        [params.Q0, np.ones(T * k), np.full(T * p, params.sigma2_xi)]
    )
    M = np.vstack(S + O)
    mean = np.concatenate(c + d)
    cov = (M * noise_var) @ M.T
    return mean, cov


def conditional_moments(params, y):
    """Posterior means, covariances and lag-one covariances of the states, plus the log density.

    Note the "log density" is the product of the conditionals
    p(y_t | y_{1:t-1}), which equals the joint density of the stacked y
    under the plug-in construction because the lag inputs are the
    observed values.
    """
    y = np.asarray(y, float)
    T, p = y.shape
    k = params.k
    mean, cov = joint_gaussian(params, y)
    ns = (T + 1) * k
    mx, my = mean[:ns], mean[ns:]
    Sxx, Sxy, Syy = cov[:ns, :ns], cov[:ns, ns:], cov[ns:, ns:]
    G = np.linalg.solve(Syy, Sxy.T).T
    post_mean = mx + G @ (y.reshape(-1) - my)
    post_cov = Sxx - G @ Sxy.T
    m = post_mean.reshape(T + 1, k)
    V = np.array([post_cov[t * k:(t + 1) * k, t * k:(t + 1) * k] for t in range(T + 1)])
    lag = np.zeros((T + 1, k, k))
    for t in range(1, T + 1):
        lag[t] = post_cov[t * k:(t + 1) * k, (t - 1) * k: t * k]
    loglik = stats.multivariate_normal(my, Syy).logpdf(y.reshape(-1))
    return m, V, lag, float(loglik)


def stacked_loglik(params, y):
    """Log density of the stacked observation vector.

    Written by unrolling y_t = Z theta_t + B y_{t-1} + xi_t into the
    observations alone; the lagged y inside the recursion are random here,
    so this is a genuinely different construction from the plug-in form.
    """
    y = np.asarray(y, float)
    T, p = y.shape
    k = params.k
    F, A, Z, B = params.F, params.A, params.Z, params.B
    n = k + T * p
    # x_t = (y_t, theta_t) = M x_{t-1} + noise, driven by (theta_0, eta, xi)
    ne = k + T * k + T * p
    Mx = np.block([[B + Z @ A, Z @ F], [A, F]])
    state = np.zeros((p + k, ne))
    state[p:, :k] = np.eye(k)
    rows = []
    for t in range(1, T + 1):
        nxt = Mx @ state
        eta = np.zeros((p + k, ne))
        eta[p:, k + (t - 1) * k: k + t * k] = np.eye(k)
        eta[:p, k + (t - 1) * k: k + t * k] = Z
        xi = np.zeros((p + k, ne))
        off = k + T * k + (t - 1) * p
        xi[:p, off: off + p] = np.eye(p)
        state = nxt + eta + xi
        rows.append(state[:p])
    Mobs = np.vstack(rows)
    noise_var = np.concatenate(
        [params.Q0, np.ones(T * k), np.full(T * p, params.sigma2_xi)]
    )
    cov = (Mobs * noise_var) @ Mobs.T
    return float(stats.multivariate_normal(np.zeros(T * p), cov).logpdf(y.reshape(-1)))


def sequential_projection_mstep(stats_):
    """Observation and state updates by eliminating the state regressor first.

    Lag coefficient from the residual-projection form, then the state
    loading from back substitution, with expected second moments standing
    in for the stacked-state products.
    """
    s = stats_
    k = s.k_dim

    def route(ThTh, YTh, LTh, YL, LL):
        if k == 0 or ThTh.shape[0] == 0:
            Bh = YL @ np.linalg.inv(LL)
            return np.zeros((YL.shape[0], 0)), Bh
        inv = np.linalg.inv(ThTh)
        # B = y M L' [L M L']^{-1} with M = I - Th'(Th Th')^{-1} Th
        yML = YL - YTh @ inv @ LTh.T
        LML = LL - LTh @ inv @ LTh.T
        Bh = yML @ np.linalg.inv(LML)
        # Z = (y Th' - B L Th') (Th Th')^{-1}
        Zh = (YTh - Bh @ LTh) @ inv
        return Zh, Bh

    Z, B = route(s.tt, s.yt, s.lt, s.yl, s.ll)
    # state equation: response theta_t, regressors theta_{t-1} and y_{t-1}
    F, A = route(s.pp, s.tp, s.pl.T, s.lt.T, s.ll)
    return F, A, Z, B


def var1_ols(dataset):
    """Direct lag-1 least squares from the data matrix, via numpy lstsq."""
    Y = dataset.series()
    p = Y.shape[2]
    X = Y[:, :-1, :].reshape(-1, p)
    Yc = Y[:, 1:, :].reshape(-1, p)
    coef, *_ = np.linalg.lstsq(X, Yc, rcond=None)
    return coef.T, Yc - X @ coef
