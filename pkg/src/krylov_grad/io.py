"""File ingestion and result serialization.

Graph inputs arrive as SNAP-style edge lists or Matrix Market coordinate
files; results leave as CSV or JSON-lines streams of RunRecord rows.  Every
float is emitted with 17 significant digits so a parse of the output
reproduces the records exactly.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse as sp

from .errors import ParseError
from .operator import DenseSymmetricOperator, SparseGraphOperator

SCHEMA_VERSION = 1

# matrices up to this order load as dense operators by default
DENSE_LOAD_CUTOFF = 400


@dataclass
class RunRecord:
    """One experiment result row: parameters in, metrics out."""

    experiment: str
    params: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION


def load_edge_list(path: str) -> SparseGraphOperator:
    """Read a whitespace "u v" edge list into a symmetric unit adjacency.

    Lines starting with '#' are comments.  Node ids may be arbitrary
    non-negative integers and are compacted to 0..n-1 in sorted order;
    duplicate edges collapse to one and self-loops are dropped.
    """
    edges = []
    nodes = set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'u v', got {raw.rstrip()!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: non-integer node id in {raw.rstrip()!r}"
                ) from None
            if a < 0 or b < 0:
                raise ParseError(f"{path}:{lineno}: negative node id in {raw.rstrip()!r}")
            nodes.add(a)
            nodes.add(b)
            if a != b:
                edges.append((min(a, b), max(a, b)))
    if not nodes:
        raise ValueError(f"{path}: empty edge list (no nodes)")
    compact = {node: i for i, node in enumerate(sorted(nodes))}
    n = len(compact)
    pairs = sorted({(compact[a], compact[b]) for a, b in edges})
    if pairs:
        rows = np.array([p[0] for p in pairs] + [p[1] for p in pairs])
        cols = np.array([p[1] for p in pairs] + [p[0] for p in pairs])
        vals = np.ones(rows.shape[0])
    else:
        rows = np.zeros(0, dtype=int)
        cols = np.zeros(0, dtype=int)
        vals = np.zeros(0)
    adj = sp.csr_array((vals, (rows, cols)), shape=(n, n))
    return SparseGraphOperator(adj)


def load_matrix_market(path: str, as_dense: bool | None = None):
    """Read a coordinate real symmetric Matrix Market file.

    Returns a DenseSymmetricOperator for small orders (or as_dense=True),
    otherwise a SparseGraphOperator over the expanded symmetric storage.
    """
    with open(path) as fh:
        header = fh.readline()
        fields = header.strip().split()
        if len(fields) != 5 or fields[0] != "%%MatrixMarket":
            raise ParseError(f"{path}:1: not a MatrixMarket banner: {header.rstrip()!r}")
        _, obj, fmt, dtype, symmetry = (f.lower() for f in fields)
        if (obj, fmt, dtype, symmetry) != ("matrix", "coordinate", "real", "symmetric"):
            raise ParseError(
                f"{path}:1: unsupported format '{obj} {fmt} {dtype} {symmetry}'; "
                "only 'matrix coordinate real symmetric' is handled"
            )
        lineno = 1
        size_line = None
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            size_line = line
            break
        if size_line is None:
            raise ParseError(f"{path}: missing size line")
        try:
            nrows, ncols, nnz = (int(tok) for tok in size_line.split())
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed size line {size_line!r}") from None
        if nrows != ncols:
            raise ParseError(f"{path}: matrix must be square, got {nrows}x{ncols}")
        rows, cols, vals = [], [], []
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            toks = line.split()
            if len(toks) != 3:
                raise ParseError(f"{path}:{lineno}: expected 'i j value', got {raw.rstrip()!r}")
            try:
                i, j, v = int(toks[0]), int(toks[1]), float(toks[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: malformed entry {raw.rstrip()!r}") from None
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise ParseError(f"{path}:{lineno}: index ({i}, {j}) out of bounds")
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
        if len(rows) != nnz:
            raise ParseError(f"{path}: header promised {nnz} entries, found {len(rows)}")
    r = np.array(rows, dtype=int)
    c = np.array(cols, dtype=int)
    v = np.array(vals)
    off = r != c
    adj = sp.csr_array(
        (np.concatenate([v, v[off]]), (np.concatenate([r, c[off]]), np.concatenate([c, r[off]]))),
        shape=(nrows, ncols),
    )
    dense = as_dense if as_dense is not None else nrows <= DENSE_LOAD_CUTOFF
    if dense:
        return DenseSymmetricOperator(adj.toarray())
    return SparseGraphOperator(adj)


def write_matrix_market(path: str, matrix) -> None:
    """Write a symmetric matrix as coordinate real symmetric (lower triangle)."""
    A = sp.coo_array(matrix)
    mask = A.row >= A.col
    rows = A.row[mask]
    cols = A.col[mask]
    vals = A.data[mask]
    order = np.lexsort((rows, cols))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {rows.shape[0]}\n")
        for k in order:
            fh.write(f"{rows[k] + 1} {cols[k] + 1} {_fmt_float(float(vals[k]))}\n")


# -- record serialization -----------------------------------------------------------


def _fmt_float(x: float) -> str:
    return format(x, ".17g")


def _to_json_fragment(value) -> str:
    """JSON text with floats at 17 significant digits (lossless round-trip)."""
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt_float(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        return '{"re":%s,"im":%s}' % (_fmt_float(value.real), _fmt_float(value.imag))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ",".join(_to_json_fragment(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ",".join(
            f"{json.dumps(str(k))}:{_to_json_fragment(v)}" for k, v in value.items()
        ) + "}"
    raise TypeError(f"cannot serialize value of type {type(value).__name__}")


def _record_to_json(rec: RunRecord) -> str:
    payload = {
        "schema_version": rec.schema_version,
        "experiment": rec.experiment,
        "params": rec.params,
        "metrics": rec.metrics,
    }
    return _to_json_fragment(payload)


def _csv_header(rec: RunRecord) -> list[str]:
    return (
        ["schema_version", "experiment"]
        + [f"param.{k}" for k in rec.params]
        + [f"metric.{k}" for k in rec.metrics]
    )


def emit_records(records, fmt: str, path: str) -> None:
    """Write records as CSV (fixed header order) or JSON lines.

    The path "-" writes to stdout.  CSV cells hold JSON fragments so vector
    values survive the trip; all records in one CSV stream must share the
    same field layout.
    """
    records = list(records)
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"format must be 'csv' or 'jsonl', got {fmt!r}")
    out = sys.stdout if path == "-" else open(path, "w", newline="")
    try:
        if fmt == "jsonl":
            for rec in records:
                out.write(_record_to_json(rec) + "\n")
        else:
            if not records:
                return
            header = _csv_header(records[0])
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(header)
            for rec in records:
                if _csv_header(rec) != header:
                    raise ValueError("CSV records must share one field layout")
                row = [str(rec.schema_version), rec.experiment]
                row += [_to_json_fragment(v) for v in rec.params.values()]
                row += [_to_json_fragment(v) for v in rec.metrics.values()]
                writer.writerow(row)
    finally:
        if out is not sys.stdout:
            out.close()


def read_records(path: str, fmt: str) -> list[RunRecord]:
    """Parse records previously written by emit_records."""
    if fmt == "jsonl":
        out = []
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                out.append(
                    RunRecord(
                        experiment=obj["experiment"],
                        params=obj["params"],
                        metrics=obj["metrics"],
                        schema_version=obj["schema_version"],
                    )
                )
        return out
    if fmt == "csv":
        out = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                return []
            for row in reader:
                rec = RunRecord(experiment="", params={}, metrics={})
                for key, cell in zip(header, row):
                    if key == "schema_version":
                        rec.schema_version = int(cell)
                    elif key == "experiment":
                        rec.experiment = cell
                    elif key.startswith("param."):
                        rec.params[key[6:]] = json.loads(cell)
                    elif key.startswith("metric."):
                        rec.metrics[key[7:]] = json.loads(cell)
                out.append(rec)
        return out
    raise ValueError(f"format must be 'csv' or 'jsonl', got {fmt!r}")
