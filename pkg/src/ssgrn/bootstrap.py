"""Replicate bootstrap of the EM fit, percentile intervals and the edge network.

An entry G[i, j] is read as "node j influences node i", so a significant
entry becomes the directed edge j -> i.  Nodes are the p genes followed by
the k hidden regulators, named TF1..TFk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linear_sum_assignment

from . import em
from .datamodel import GenomicGraphMatrix, ModelParams, assemble_graph_matrix
from .errors import DataError, NumericalError, SSGRNError

logger = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.2


def resample(dataset, seed):
    """Draw n_R replicates uniformly with replacement."""
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, dataset.n_R, size=dataset.n_R)
    return dataset.select_replicates(idx)


def sample_seeds(master_seed: int, n_boot: int) -> np.ndarray:
    """Per-sample seeds derived from the master seed."""
    return np.random.SeedSequence(master_seed).generate_state(n_boot, dtype=np.uint32)


def align_hidden_states(params: ModelParams, reference: ModelParams) -> ModelParams:
    """Permute and sign-flip hidden states so the columns of Z best match ``reference``.

    Matching maximises the total absolute cosine similarity between columns
    of Z via a linear assignment.  The transformation theta* = P theta
    (P a signed permutation) leaves the likelihood unchanged.
    """
    k = params.k
    if k == 0:
        return params
    Zr, Zb = reference.Z, params.Z
    nr = np.linalg.norm(Zr, axis=0)
    nb = np.linalg.norm(Zb, axis=0)
    denom = np.outer(nr, nb)
    sim = np.divide(Zr.T @ Zb, denom, out=np.zeros((k, k)), where=denom > 0)
    rows, cols = linear_sum_assignment(-np.abs(sim))
    P = np.zeros((k, k))
    P[rows, cols] = np.where(sim[rows, cols] < 0, -1.0, 1.0)
    return params.replace(F=P @ params.F @ P.T, A=P @ params.A, Z=params.Z @ P.T)


@dataclass(frozen=True)
class BootstrapDistribution:
    samples: np.ndarray  # (n_ok, p+k, p+k) aligned G estimates
    seeds: np.ndarray  # seeds of every attempted sample
    reference: em.FitResult
    failures: tuple = ()  # (seed, message) for excluded samples

    @property
    def p(self) -> int:
        return self.reference.params.p

    @property
    def k(self) -> int:
        return self.reference.params.k

    @property
    def reference_graph(self) -> GenomicGraphMatrix:
        return assemble_graph_matrix(self.reference.params)


def _one_sample(dataset, k, seed, config, reference):
    try:
        fr = em.fit(resample(dataset, int(seed)), k, config, Q0=reference.Q0)
    except SSGRNError as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return assemble_graph_matrix(align_hidden_states(fr.params, reference)).G, None


def bootstrap_fit(dataset, k: int, n_boot: int = 200, config: em.FitConfig | None = None,
                  reference: em.FitResult | None = None, n_jobs: int = 1) -> BootstrapDistribution:
    """Refit the model on ``n_boot`` replicate resamples.

    Randomness is fully determined by ``config.seed``.  Failed refits are
    recorded and dropped; more than 20% failures is an error.
    """
    if n_boot < 2:
        raise DataError("need at least 2 bootstrap samples")
    config = config or em.FitConfig()
    if reference is None:
        reference = em.fit(dataset, k, config)
    seeds = sample_seeds(config.seed, n_boot)
    out = Parallel(n_jobs=n_jobs)(
        delayed(_one_sample)(dataset, k, s, config, reference.params) for s in seeds
    )
    failures = tuple((int(s), msg) for s, (_, msg) in zip(seeds, out) if msg is not None)
    if len(failures) > MAX_FAILURE_FRACTION * n_boot:
        raise NumericalError(
            f"{len(failures)} of {n_boot} bootstrap fits failed; first: {failures[0][1]}"
        )
    for s, msg in failures:
        logger.warning("bootstrap sample with seed %d excluded: %s", s, msg)
    n = reference.params.p + k
    samples = np.array([g for g, _ in out if g is not None]).reshape(-1, n, n)
    return BootstrapDistribution(samples, seeds, reference, failures)


@dataclass(frozen=True)
class EdgeDecision:
    source: str
    target: str
    block: str
    estimate: float
    lower: float
    upper: float
    significant: bool


def node_names(gene_names, k: int) -> list:
    names = list(gene_names) + [f"TF{i + 1}" for i in range(k)]
    if len(set(names)) != len(names):
        raise DataError("gene names collide with hidden-state node names TF1..TFk")
    return names


@dataclass(frozen=True)
class EdgeDecisions:
    """Per-entry interval tests over G, held as (p+k, p+k) arrays."""

    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    p: int
    k: int
    names: tuple

    @property
    def significant(self) -> np.ndarray:
        return (self.lower > 0) | (self.upper < 0)

    def __getitem__(self, ij) -> EdgeDecision:
        i, j = ij
        block = ("B", "Z", "A", "F")[2 * (i >= self.p) + (j >= self.p)]
        return EdgeDecision(
            source=self.names[j],
            target=self.names[i],
            block=block,
            estimate=float(self.estimate[i, j]),
            lower=float(self.lower[i, j]),
            upper=float(self.upper[i, j]),
            significant=bool(self.significant[i, j]),
        )

    def __iter__(self):
        n = self.p + self.k
        for i in range(n):
            for j in range(n):
                yield self[i, j]

    def __len__(self):
        return (self.p + self.k) ** 2


def confidence_intervals(dist: BootstrapDistribution, level: float = 0.95,
                         gene_names=None) -> EdgeDecisions:
    """Percentile intervals with linearly interpolated order statistics."""
    if not 0 < level < 1:
        raise DataError(f"confidence level must lie in (0, 1), got {level}")
    if dist.samples.shape[0] < 2:
        raise DataError("need at least 2 successful bootstrap samples")
    alpha = 1.0 - level
    lo, hi = np.quantile(dist.samples, [alpha / 2, 1 - alpha / 2], axis=0)
    if gene_names is None:
        gene_names = [f"g{i + 1}" for i in range(dist.p)]
    return EdgeDecisions(
        estimate=dist.reference_graph.G,
        lower=lo,
        upper=hi,
        p=dist.p,
        k=dist.k,
        names=tuple(node_names(gene_names, dist.k)),
    )


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    block: str
    weight: float

    @property
    def sign(self) -> str:
        return "+" if self.weight > 0 else "-"


@dataclass
class NetworkGraph:
    """Directed graph over genes and hidden regulators."""

    genes: list
    tfs: list
    edges: list = field(default_factory=list)

    @property
    def nodes(self) -> list:
        return self.genes + self.tfs

    def out_degree(self) -> dict:
        deg = dict.fromkeys(self.nodes, 0)
        for e in self.edges:
            deg[e.source] += 1
        return deg

    def subgraph(self, nodes) -> "NetworkGraph":
        keep = set(nodes)
        return NetworkGraph(
            [g for g in self.genes if g in keep],
            [t for t in self.tfs if t in keep],
            [e for e in self.edges if e.source in keep and e.target in keep],
        )


def significant_network(decisions: EdgeDecisions, gene_names=None) -> NetworkGraph:
    """One edge source -> target for every entry whose interval excludes zero."""
    p, k = decisions.p, decisions.k
    if gene_names is not None:
        names = node_names(gene_names, k)
        decisions = EdgeDecisions(decisions.estimate, decisions.lower, decisions.upper,
                                  p, k, tuple(names))
    names = list(decisions.names)
    graph = NetworkGraph(names[:p], names[p:])
    for i, j in zip(*np.nonzero(decisions.significant)):
        d = decisions[i, j]
        graph.edges.append(Edge(d.source, d.target, d.block, d.estimate))
    return graph


def out_degree_ranking(graph: NetworkGraph) -> list:
    """(node, out_degree) pairs, highest degree first, ties alphabetical."""
    return sorted(graph.out_degree().items(), key=lambda kv: (-kv[1], kv[0]))


def hub_nodes(graph: NetworkGraph, min_out_degree: int = 2) -> list:
    return [n for n, d in out_degree_ranking(graph) if d >= min_out_degree]
