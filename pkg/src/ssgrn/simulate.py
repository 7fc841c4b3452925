"""Synthetic replicated time courses and network-recovery scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import ExpressionDataset, ModelParams, assemble_graph_matrix, block_mask
from .errors import DataError


@dataclass(frozen=True)
class GroundTruth:
    params: ModelParams

    @property
    def adjacency(self) -> np.ndarray:
        """Boolean mask of the nonzero entries of the generating G."""
        return np.abs(assemble_graph_matrix(self.params).G) > 0


@dataclass(frozen=True)
class RecoveryMetrics:
    TP: int
    FP: int
    TN: int
    FN: int

    @property
    def TPR(self) -> float:
        return self.TP / (self.TP + self.FN) if self.TP + self.FN else 0.0

    @property
    def FPR(self) -> float:
        return self.FP / (self.FP + self.TN) if self.FP + self.TN else 0.0

    @property
    def F1(self) -> float:
        d = 2 * self.TP + self.FP + self.FN
        return 2 * self.TP / d if d else 0.0

    def as_dict(self) -> dict:
        return {
            "TP": self.TP, "FP": self.FP, "TN": self.TN, "FN": self.FN,
            "TPR": self.TPR, "FPR": self.FPR, "F1": self.F1,
        }


def companion_matrix(params: ModelParams) -> np.ndarray:
    """Transition matrix of the joint process (y_t, theta_t) with noise removed."""
    Z, A, F, B = params.Z, params.A, params.F, params.B
    return np.block([[B + Z @ A, Z @ F], [A, F]])


def spectral_radius(params: ModelParams) -> float:
    M = companion_matrix(params)
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def random_ground_truth(
    p: int,
    k: int,
    seed: int,
    density: float = 0.3,
    low: float = 0.3,
    high: float = 0.8,
    diag: float = 0.5,
    max_radius: float = 0.95,
    sigma2_xi: float = 0.1,
) -> ModelParams:
    """Draw a sparse random model.

    Every entry of G other than the diagonals of F and B is nonzero with
    probability ``density``, with magnitude uniform on [low, high] and a
    random sign.  The diagonals of F and B are set to ``diag``.  If the
    noiseless joint dynamics have spectral radius >= ``max_radius``, F, A and
    B are scaled down together (which scales the companion matrix linearly).
    """
    rng = np.random.default_rng(seed)
    n = p + k
    mag = rng.uniform(low, high, size=(n, n))
    sign = rng.choice([-1.0, 1.0], size=(n, n))
    G = np.where(rng.random((n, n)) < density, mag * sign, 0.0)
    idx = np.arange(n)
    G[idx, idx] = diag
    params = ModelParams(
        B=G[:p, :p], Z=G[:p, p:], A=G[p:, :p], F=G[p:, p:], sigma2_xi=sigma2_xi
    )
    rho = spectral_radius(params)
    if rho >= max_radius:
        c = 0.999 * max_radius / rho
        params = params.replace(F=c * params.F, A=c * params.A, B=c * params.B)
    return params


def generate(params: ModelParams, T: int, n_R: int, seed: int, gene_names=None):
    """Simulate ``n_R`` independent replicates of length ``T``.

    Replicate r draws its noise from its own stream spawned from ``seed``,
    so the output is a pure function of (params, T, n_R, seed).

    Returns
    -------
    dataset : ExpressionDataset
    truth : GroundTruth
    """
    if T < 2 or n_R < 1:
        raise DataError("need T >= 2 and n_R >= 1")
    p, k = params.p, params.k
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_R)]
    sd0 = np.sqrt(params.Q0)
    sdx = np.sqrt(params.sigma2_xi)
    theta0 = np.empty((n_R, k))
    eta = np.empty((n_R, T, k))
    xi = np.empty((n_R, T, p))
    for r, rng in enumerate(streams):
        theta0[r] = sd0 * rng.standard_normal(k)
        eta[r] = rng.standard_normal((T, k))
        xi[r] = sdx * rng.standard_normal((T, p))

    Y = np.empty((n_R, T, p))
    theta = theta0
    ylag = np.zeros((n_R, p))
    for t in range(T):
        theta = theta @ params.F.T + ylag @ params.A.T + eta[:, t]
        Y[:, t] = theta @ params.Z.T + ylag @ params.B.T + xi[:, t]
        ylag = Y[:, t]
    return ExpressionDataset.from_series(Y, gene_names), GroundTruth(params)


def recovery_metrics(truth, inferred, block: str | None = None, p: int | None = None) -> RecoveryMetrics:
    """Confusion counts of an inferred edge mask against the true nonzero pattern of G.

    ``truth`` may be a GroundTruth or a boolean mask.  ``block`` restricts
    scoring to one of "B", "Z", "A", "F"; with a bare mask the gene count
    ``p`` is then required.
    """
    if isinstance(truth, GroundTruth):
        p, k = truth.params.p, truth.params.k
        truth = truth.adjacency
    else:
        truth = np.asarray(truth, dtype=bool)
        if block and p is None:
            raise DataError("scoring a single block of a bare mask needs p")
        p = truth.shape[0] if p is None else p
        k = truth.shape[0] - p
    inferred = np.asarray(inferred, dtype=bool)
    if truth.shape != inferred.shape:
        raise DataError(f"mask shapes differ: {truth.shape} vs {inferred.shape}")
    sel = block_mask(p, k, block) if block else np.ones(truth.shape, dtype=bool)
    t, i = truth[sel], inferred[sel]
    return RecoveryMetrics(
        TP=int(np.sum(t & i)),
        FP=int(np.sum(~t & i)),
        TN=int(np.sum(~t & ~i)),
        FN=int(np.sum(t & ~i)),
    )
