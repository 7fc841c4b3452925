"""Core value types for the input-feedback state-space network model.

The model, for replicate r and t = 1..T::

    theta_t = F theta_{t-1} + A y_{t-1} + eta_t,     eta_t ~ N(0, I_k)
    y_t     = Z theta_t     + B y_{t-1} + xi_t,      xi_t  ~ N(0, sigma2_xi I_p)

with theta_0 ~ N(0, Q0) and y_0 = 0.

Matrix-action convention used throughout the package: entry (i, j) of any
block means "column j influences row i".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, InfeasibleError

SIGMA2_FLOOR = 1e-12


def _frozen(a, ndim):
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != ndim:
        raise DataError(f"expected a {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dims:
    """Problem dimensions: genes ``p``, hidden states ``k``, time points ``T``, replicates ``n_R``."""

    p: int
    T: int
    n_R: int
    k: int = 0

    def __post_init__(self):
        if self.p < 1 or self.T < 2 or self.n_R < 1 or self.k < 0:
            raise DataError(f"invalid dimensions {self}")

    @property
    def n_obs(self) -> int:
        return self.p * self.T * self.n_R

    @property
    def feasible(self) -> bool:
        return param_count(self.p, self.k) < self.n_obs

    def with_k(self, k: int) -> "Dims":
        return replace(self, k=k)


def param_count(p: int, k: int) -> int:
    """Number of free interaction parameters, ``p**2 + 2*k*p + k**2``."""
    if isinstance(p, Dims):
        p, k = p.p, p.k
    return p * p + 2 * k * p + k * k


def max_hidden_k(p: int, T: int, n_R: int) -> int:
    """Largest hidden dimension k with ``0 <= k < -p + sqrt(p*T*n_R)``.

    Raises
    ------
    InfeasibleError
        When not even k = 0 satisfies the strict bound.
    """
    if min(p, T, n_R) < 1:
        raise DataError("p, T and n_R must be positive")
    n = p * T * n_R
    # integer form of the strict bound: (p + k)**2 < n
    r = math.isqrt(n)
    if r * r == n:
        r -= 1
    k = r - p
    if k < 0:
        raise InfeasibleError(
            f"no hidden dimension is feasible for p={p}, T={T}, n_R={n_R}"
        )
    return k


@dataclass(frozen=True)
class ExpressionDataset:
    """Replicated expression time courses.

    ``values`` is indexed ``[gene, time, replicate]``.
    """

    values: np.ndarray
    gene_names: tuple
    time_labels: tuple = None
    replicate_labels: tuple = None

    def __post_init__(self):
        v = _frozen(self.values, 3)
        object.__setattr__(self, "values", v)
        p, T, n_R = v.shape
        names = tuple(str(g) for g in self.gene_names)
        if len(names) != p:
            raise DataError(f"{len(names)} gene names for {p} genes")
        if len(set(names)) != p:
            raise DataError("gene names must be unique")
        object.__setattr__(self, "gene_names", names)
        if self.time_labels is None:
            object.__setattr__(self, "time_labels", tuple(str(t + 1) for t in range(T)))
        if self.replicate_labels is None:
            object.__setattr__(
                self, "replicate_labels", tuple(str(r + 1) for r in range(n_R))
            )
        if len(self.time_labels) != T or len(self.replicate_labels) != n_R:
            raise DataError("label lengths do not match the value tensor")
        if not np.all(np.isfinite(v)):
            raise DataError("expression values must be finite")
        Dims(p, T, n_R)

    @property
    def dims(self) -> Dims:
        return Dims(*self.values.shape)

    @property
    def p(self):
        return self.values.shape[0]

    @property
    def T(self):
        return self.values.shape[1]

    @property
    def n_R(self):
        return self.values.shape[2]

    def replicate(self, r: int) -> np.ndarray:
        """Series of replicate ``r`` as a (T, p) array."""
        return self.values[:, :, r].T

    def series(self) -> np.ndarray:
        """All replicates stacked as an (n_R, T, p) array."""
        return np.ascontiguousarray(np.transpose(self.values, (2, 1, 0)))

    @classmethod
    def from_series(cls, Y, gene_names=None, **labels) -> "ExpressionDataset":
        """Build from an (n_R, T, p) array."""
        Y = np.asarray(Y, dtype=float)
        if gene_names is None:
            gene_names = [f"g{i + 1}" for i in range(Y.shape[2])]
        return cls(np.transpose(Y, (2, 1, 0)), tuple(gene_names), **labels)

    def select_replicates(self, idx) -> "ExpressionDataset":
        idx = np.asarray(idx, dtype=int)
        return ExpressionDataset(
            self.values[:, :, idx],
            self.gene_names,
            self.time_labels,
            tuple(self.replicate_labels[i] for i in idx),
        )


@dataclass(frozen=True)
class ModelParams:
    """Interaction matrices and noise settings of the state-space model.

    ``sigma2_eta`` is pinned to 1 and ``Q0``/``a0`` are fixed priors; only
    F, A, Z, B and ``sigma2_xi`` are estimated.
    """

    F: np.ndarray
    A: np.ndarray
    Z: np.ndarray
    B: np.ndarray
    sigma2_xi: float
    Q0: np.ndarray = None
    sigma2_eta: float = field(default=1.0)

    def __post_init__(self):
        B = _frozen(self.B, 2)
        p = B.shape[0]
        F = _frozen(np.reshape(self.F, np.shape(self.F) or (0, 0)), 2)
        k = F.shape[0]
        A = _frozen(np.reshape(self.A, (k, p)), 2)
        Z = _frozen(np.reshape(self.Z, (p, k)), 2)
        if B.shape != (p, p) or F.shape != (k, k):
            raise DataError("B must be p x p and F must be k x k")
        Q0 = np.ones(k) if self.Q0 is None else np.asarray(self.Q0, dtype=float)
        if Q0.ndim == 2:
            if np.any(Q0 != np.diag(np.diag(Q0))):
                raise DataError("Q0 must be diagonal")
            Q0 = np.diag(Q0)
        Q0 = _frozen(Q0.reshape(k), 1)
        for name, val in (("F", F), ("A", A), ("Z", Z), ("B", B)):
            object.__setattr__(self, name, val)
            if not np.all(np.isfinite(val)):
                raise DataError(f"{name} has non-finite entries")
        object.__setattr__(self, "Q0", Q0)
        if not np.all(Q0 > 0):
            raise DataError("Q0 diagonal must be positive")
        s2 = float(self.sigma2_xi)
        if not (s2 > 0 and math.isfinite(s2)):
            raise DataError(f"sigma2_xi must be positive, got {s2}")
        object.__setattr__(self, "sigma2_xi", s2)
        if self.sigma2_eta != 1.0:
            raise DataError("sigma2_eta is fixed at 1 for identifiability")

    @property
    def p(self) -> int:
        return self.B.shape[0]

    @property
    def k(self) -> int:
        return self.F.shape[0]

    @property
    def a0(self) -> np.ndarray:
        return np.zeros(self.k)

    @property
    def Q0_matrix(self) -> np.ndarray:
        return np.diag(self.Q0)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def graph(self) -> "GenomicGraphMatrix":
        return assemble_graph_matrix(self)


@dataclass(frozen=True)
class GenomicGraphMatrix:
    """The block matrix ``G = [[B, Z], [A, F]]`` over p genes then k hidden states."""

    G: np.ndarray
    p: int
    k: int

    def __post_init__(self):
        G = _frozen(self.G, 2)
        n = self.p + self.k
        if G.shape != (n, n):
            raise DataError(f"G has shape {G.shape}, expected ({n}, {n})")
        object.__setattr__(self, "G", G)

    @property
    def block_labels(self) -> dict:
        """Index ranges of the gene and hidden-state blocks."""
        return {"gene": range(0, self.p), "tf": range(self.p, self.p + self.k)}

    def blocks(self) -> dict:
        p = self.p
        return {
            "B": self.G[:p, :p],
            "Z": self.G[:p, p:],
            "A": self.G[p:, :p],
            "F": self.G[p:, p:],
        }

    def block_of(self, i: int, j: int) -> str:
        return ("B", "Z", "A", "F")[2 * (i >= self.p) + (j >= self.p)]


def assemble_graph_matrix(params: ModelParams) -> GenomicGraphMatrix:
    G = np.block([[params.B, params.Z], [params.A, params.F]])
    return GenomicGraphMatrix(G, params.p, params.k)


def disassemble_graph_matrix(graph: GenomicGraphMatrix) -> dict:
    """Copy the four blocks out of ``graph``; inverse of :func:`assemble_graph_matrix`."""
    return {name: np.array(b) for name, b in graph.blocks().items()}


def block_mask(p: int, k: int, block: str | None) -> np.ndarray:
    """Boolean (p+k, p+k) mask selecting one block of G, or all of G when ``block`` is None."""
    n = p + k
    mask = np.zeros((n, n), dtype=bool)
    if block is None or block.lower() == "all":
        mask[:] = True
        return mask
    sl = {
        "B": (slice(0, p), slice(0, p)),
        "Z": (slice(0, p), slice(p, n)),
        "A": (slice(p, n), slice(0, p)),
        "F": (slice(p, n), slice(p, n)),
    }
    try:
        mask[sl[block.upper()]] = True
    except KeyError:
        raise DataError(f"unknown block {block!r}; expected one of B, Z, A, F, all")
    return mask
