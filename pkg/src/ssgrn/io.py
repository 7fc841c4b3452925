"""File formats: long CSV expression data, JSON parameters, TSV tables, DOT graphs.

Report numbers are written with 10 significant digits so repeated runs give
byte-identical files.  Expression CSVs use ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .datamodel import ExpressionDataset, ModelParams
from .errors import DataError

CSV_HEADER = ("gene", "replicate", "time", "value")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def _round(x):
    return float(format(float(x), ".10g"))


def _time_key(label):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def ingest_csv(path) -> ExpressionDataset:
    """Read a long-format CSV with header ``gene,replicate,time,value``.

    Genes and replicates keep their order of first appearance; times are
    sorted numerically.  Every (gene, time, replicate) cell must appear
    exactly once.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file")
        if tuple(header) != CSV_HEADER:
            raise DataError(f"{path}: header must be {','.join(CSV_HEADER)}, got {','.join(header)}")
        cells = {}
        genes, reps, times = {}, {}, {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            g, r, t, v = (c.strip() for c in row)
            try:
                value = float(v)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value {v!r}")
            if not math.isfinite(value):
                raise DataError(f"{path}:{lineno}: non-finite value {v!r}")
            key = (g, t, r)
            if key in cells:
                raise DataError(f"{path}:{lineno}: duplicate cell gene={g} time={t} replicate={r}")
            cells[key] = value
            genes.setdefault(g, None)
            reps.setdefault(r, None)
            times.setdefault(t, None)
    gene_list = list(genes)
    rep_list = list(reps)
    time_list = sorted(times, key=_time_key)
    if not gene_list:
        raise DataError(f"{path}: no data rows")
    values = np.empty((len(gene_list), len(time_list), len(rep_list)))
    for gi, g in enumerate(gene_list):
        for ti, t in enumerate(time_list):
            for ri, r in enumerate(rep_list):
                try:
                    values[gi, ti, ri] = cells[(g, t, r)]
                except KeyError:
                    raise DataError(
                        f"{path}: missing cell gene={g} time={t} replicate={r}"
                    ) from None
    return ExpressionDataset(values, tuple(gene_list), tuple(time_list), tuple(rep_list))


def export_csv(dataset: ExpressionDataset, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for ri, r in enumerate(dataset.replicate_labels):
            for ti, t in enumerate(dataset.time_labels):
                for gi, g in enumerate(dataset.gene_names):
                    w.writerow((g, r, t, repr(float(dataset.values[gi, ti, ri]))))
    return path


def params_to_dict(params: ModelParams, gene_names=None, **extra) -> dict:
    def mat(a):
        return [[_round(x) for x in row] for row in np.asarray(a)]

    doc = {
        "dims": {"p": params.p, "k": params.k},
        "gene_names": list(gene_names) if gene_names is not None else None,
        "blocks": {name: mat(getattr(params, name)) for name in ("F", "A", "Z", "B")},
        "sigma2_xi": _round(params.sigma2_xi),
        "sigma2_eta": 1.0,
        "Q0": [_round(x) for x in params.Q0],
        "a0": [0.0] * params.k,
    }
    doc.update(extra)
    return doc


def params_from_dict(doc: dict) -> ModelParams:
    try:
        p, k = int(doc["dims"]["p"]), int(doc["dims"]["k"])
        b = doc["blocks"]
        return ModelParams(
            F=np.array(b["F"], dtype=float).reshape(k, k),
            A=np.array(b["A"], dtype=float).reshape(k, p),
            Z=np.array(b["Z"], dtype=float).reshape(p, k),
            B=np.array(b["B"], dtype=float).reshape(p, p),
            sigma2_xi=float(doc["sigma2_xi"]),
            Q0=np.array(doc.get("Q0", [1.0] * k), dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed parameter document: {exc}") from exc


def write_params(params: ModelParams, path, gene_names=None, **extra) -> Path:
    path = Path(path)
    path.write_text(json.dumps(params_to_dict(params, gene_names, **extra), indent=2) + "\n")
    return path


def read_params(path):
    """Returns (params, gene_names)."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read parameters: {exc}") from exc
    return params_from_dict(doc), doc.get("gene_names")


def write_tsv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(format_tsv(header, rows))
    return path


def format_tsv(header, rows) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(c if isinstance(c, str) else fmt(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


def read_tsv(path) -> list:
    with Path(path).open() as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


EDGE_HEADER = ("source", "target", "block", "estimate", "lower", "upper", "significant")


def edge_rows(decisions):
    for d in decisions:
        yield (d.source, d.target, d.block, d.estimate, d.lower, d.upper, d.significant)


def read_edges(path):
    """Parse an edge TSV back into the graph arrays.

    Returns
    -------
    gene_names, tf_names, estimate, lower, upper, significant
        Node lists and (p+k, p+k) arrays indexed [target, source].
    """
    rows = read_tsv(path)
    if not rows or tuple(rows[0].keys()) != EDGE_HEADER:
        raise DataError(f"{path}: not an edge table with header {' '.join(EDGE_HEADER)}")
    genes, tfs = {}, {}
    # B: gene->gene, Z: TF->gene, A: gene->TF, F: TF->TF
    src_tf = {"B": False, "Z": True, "A": False, "F": True}
    tgt_tf = {"B": False, "Z": False, "A": True, "F": True}
    for r in rows:
        blk = r["block"]
        if blk not in src_tf:
            raise DataError(f"{path}: unknown block {blk!r}")
        (tfs if src_tf[blk] else genes).setdefault(r["source"], None)
        (tfs if tgt_tf[blk] else genes).setdefault(r["target"], None)
    names = list(genes) + list(tfs)
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    est, lo, hi = (np.full((n, n), np.nan) for _ in range(3))
    sig = np.zeros((n, n), dtype=bool)
    for r in rows:
        i, j = index[r["target"]], index[r["source"]]
        try:
            est[i, j], lo[i, j], hi[i, j] = float(r["estimate"]), float(r["lower"]), float(r["upper"])
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from exc
        sig[i, j] = r["significant"].strip().lower() == "true"
    if np.isnan(est).any():
        raise DataError(f"{path}: edge table does not cover all {n * n} entries of G")
    return list(genes), list(tfs), est, lo, hi, sig


def write_dot(graph, path, name="G") -> Path:
    """Write a Graphviz digraph.

    Genes are filled circles and hidden regulators empty circles.  Solid
    edges are activations (positive weight), dashed edges repressions.
    """
    out = [f"digraph {name} {{"]
    for g in graph.genes:
        out.append(f'  "{g}" [shape=circle, style=filled, fillcolor=lightgray];')
    for t in graph.tfs:
        out.append(f'  "{t}" [shape=circle, style=solid];')
    for e in graph.edges:
        style = "solid" if e.weight > 0 else "dashed"
        out.append(
            f'  "{e.source}" -> "{e.target}" [style={style}, block={e.block}, weight_est="{fmt(e.weight)}"];'
        )
    out.append("}")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
