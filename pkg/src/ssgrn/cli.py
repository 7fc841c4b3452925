"""Infer gene regulatory networks with a state-space model: ``ssgrn <subcommand> ...``.

Exit codes: 0 success, 1 usage, 2 data, 3 numerical.  Failures print one
JSON line ``{"error": ..., "exit_code": ..., "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import bootstrap, em, io, selection, simulate
from .datamodel import assemble_graph_matrix, block_mask
from .errors import DataError, SSGRNError, UsageError

log = logging.getLogger("ssgrn")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    input: Path | None
    out: Path | None
    k: int | None = None
    k_range: str | None = None
    max_iter: int = 500
    tol: float = 1e-6
    nb: int = 200
    level: float = 0.95
    seed: int = 0
    block: str | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise UsageError("--max-iter must be >= 1")
        if not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.nb < 2:
            raise UsageError("--nb must be >= 2")
        if not 0 < self.level < 1:
            raise UsageError("--level must lie in (0, 1)")
        if self.k is not None and self.k < 0:
            raise UsageError("--k must be >= 0")

    @classmethod
    def from_args(cls, a):
        return cls(
            input=Path(a.input) if getattr(a, "input", None) else None,
            out=Path(a.out) if getattr(a, "out", None) else None,
            k=getattr(a, "k", None),
            k_range=getattr(a, "k_range", None),
            max_iter=getattr(a, "max_iter", 500),
            tol=getattr(a, "tol", 1e-6),
            nb=getattr(a, "nb", 200),
            level=getattr(a, "level", 0.95),
            seed=a.seed,
            block=getattr(a, "block", None),
        )

    @property
    def fit_config(self) -> em.FitConfig:
        return em.FitConfig(max_iter=self.max_iter, tol=self.tol, seed=self.seed)


def _emit(text: str, out: Path | None):
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    sys.stdout.write(text)


def _require(cfg, *names):
    for n in names:
        if getattr(cfg, n) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required")


def cmd_simulate(a, cfg):
    _require(cfg, "out")
    params = simulate.random_ground_truth(
        a.p, a.k if a.k is not None else 2, cfg.seed,
        density=a.density, sigma2_xi=a.sigma2,
    )
    data, truth = simulate.generate(params, a.T, a.nr, cfg.seed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    io.export_csv(data, cfg.out / "data.csv")
    io.write_params(truth.params, cfg.out / "truth.json", data.gene_names)
    print(f"wrote {cfg.out / 'data.csv'} and {cfg.out / 'truth.json'}")


def cmd_fit(a, cfg):
    _require(cfg, "input", "k", "out")
    data = io.ingest_csv(cfg.input)
    fr = em.fit(data, cfg.k, cfg.fit_config)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    io.write_params(
        fr.params, cfg.out, data.gene_names,
        loglik=io._round(fr.loglik), iterations=fr.iterations, converged=fr.converged,
        loglik_trace=[io._round(x) for x in fr.loglik_trace],
    )
    print(f"k={cfg.k}\tloglik={io.fmt(fr.loglik)}\titerations={fr.iterations}\tconverged={io.fmt(fr.converged)}")


def cmd_select_k(a, cfg):
    _require(cfg, "input", "k_range")
    data = io.ingest_csv(cfg.input)
    rep = selection.select_k(data, selection.parse_k_range(cfg.k_range), cfg.fit_config)
    rows = [(e.k, e.loglik, e.P, e.N, e.aicc, e.converged, e.k == rep.chosen_k) for e in rep.entries]
    _emit(io.format_tsv(("k", "loglik", "P", "N", "AICc", "converged", "chosen"), rows), cfg.out)


def cmd_bootstrap(a, cfg):
    _require(cfg, "input", "k", "out")
    data = io.ingest_csv(cfg.input)
    dist = bootstrap.bootstrap_fit(data, cfg.k, cfg.nb, cfg.fit_config, n_jobs=a.jobs)
    dec = bootstrap.confidence_intervals(dist, cfg.level, data.gene_names)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    io.write_tsv(cfg.out, io.EDGE_HEADER, io.edge_rows(dec))
    n_sig = int(dec.significant.sum())
    print(f"samples={dist.samples.shape[0]}\tfailed={len(dist.failures)}\tsignificant={n_sig}")


def _decisions_from_edges(path):
    genes, tfs, est, lo, hi, _ = io.read_edges(path)
    return bootstrap.EdgeDecisions(est, lo, hi, len(genes), len(tfs), tuple(genes + tfs))


def cmd_export_network(a, cfg):
    _require(cfg, "input", "out")
    dec = _decisions_from_edges(cfg.input)
    graph = bootstrap.significant_network(dec)
    if a.min_out_degree > 0:
        graph = graph.subgraph(bootstrap.hub_nodes(graph, a.min_out_degree))
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    io.write_dot(graph, cfg.out)
    print(f"nodes={len(graph.nodes)}\tedges={len(graph.edges)}")


def _inferred_mask(path: Path, p: int, k: int):
    if path.suffix == ".json":
        params, _ = io.read_params(path)
        mask = assemble_graph_matrix(params).G != 0
    else:
        mask = _decisions_from_edges(path).significant
    if mask.shape != (p + k, p + k):
        raise DataError(f"{path}: graph of shape {mask.shape} does not match truth ({p + k}, {p + k})")
    return mask


def cmd_eval(a, cfg):
    _require(cfg, "input")
    if not a.truth:
        raise UsageError("--truth is required")
    truth_params, _ = io.read_params(a.truth)
    truth = simulate.GroundTruth(truth_params)
    mask = _inferred_mask(cfg.input, truth_params.p, truth_params.k)
    block_mask(truth_params.p, truth_params.k, cfg.block)  # validates the name
    m = simulate.recovery_metrics(truth, mask, block=cfg.block)
    d = m.as_dict()
    _emit(io.format_tsv(tuple(d), [tuple(d.values())]), cfg.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssgrn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=func)
        sp.add_argument("--seed", type=int, default=0)
        return sp

    def em_flags(sp):
        sp.add_argument("--max-iter", type=int, default=500)
        sp.add_argument("--tol", type=float, default=1e-6)

    sp = add("simulate", cmd_simulate, "draw a random sparse model and simulate data")
    sp.add_argument("--p", type=int, default=2)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--T", type=int, default=10)
    sp.add_argument("--nr", type=int, default=50)
    sp.add_argument("--density", type=float, default=0.3)
    sp.add_argument("--sigma2", type=float, default=0.1)
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("fit", cmd_fit, "fit the model by EM for one hidden dimension")
    sp.add_argument("--input", required=True)
    sp.add_argument("--k", type=int, required=True)
    em_flags(sp)
    sp.add_argument("--out", required=True, help="parameter JSON file")

    sp = add("select-k", cmd_select_k, "choose the hidden dimension by AICc")
    sp.add_argument("--input", required=True)
    sp.add_argument("--k-range", required=True, help="e.g. 0..4 or 1,2,5")
    em_flags(sp)
    sp.add_argument("--out", help="report TSV file (also printed)")

    sp = add("bootstrap", cmd_bootstrap, "bootstrap confidence intervals for every entry of G")
    sp.add_argument("--input", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--nb", type=int, default=200)
    sp.add_argument("--level", type=float, default=0.95)
    sp.add_argument("--jobs", type=int, default=1)
    em_flags(sp)
    sp.add_argument("--out", required=True, help="edge TSV file")

    sp = add("export-network", cmd_export_network, "write the significant edges as a DOT graph")
    sp.add_argument("--input", required=True, help="edge TSV from bootstrap")
    sp.add_argument("--min-out-degree", type=int, default=0)
    sp.add_argument("--out", required=True, help="DOT file")

    sp = add("eval", cmd_eval, "score an inferred network against simulation truth")
    sp.add_argument("--input", required=True, help="edge TSV or parameter JSON")
    sp.add_argument("--truth", help="truth.json written by simulate")
    sp.add_argument("--block", choices=["B", "Z", "A", "F", "all"])
    sp.add_argument("--out", help="metrics TSV file (also printed)")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = RunConfig.from_args(args)
        if cfg.block == "all":
            cfg = RunConfig(**{**cfg.__dict__, "block": None})
        args.func(args, cfg)
    except SSGRNError as exc:
        sys.stderr.write(json.dumps({"error": exc.kind, "exit_code": exc.exit_code,
                                     "message": str(exc)}) + "\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "data", "exit_code": 2, "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
