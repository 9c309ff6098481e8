"""Plain-text and JSON serialization for parameters, graphs, trees,
grid sweeps and message samples.

Every writer emits deterministic bytes for equal inputs: JSON keys are
sorted and floats use ``repr``, so repeated runs diff cleanly.
"""
from __future__ import annotations

import csv
import io
import json

import numpy as np

from .graphs import LabeledGraph, LabeledTree
from .model import ModelParams, params_from_dict

SCHEMA_VERSION = 1


def dumps(obj) -> str:
    """Canonical JSON text (sorted keys, numpy scalars unwrapped)."""
    return json.dumps(obj, sort_keys=True, default=_plain)


def _plain(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


# -- parameters -------------------------------------------------------------

def params_to_json(params: ModelParams, form: str = "lambda") -> str:
    return dumps(params.as_dict(form))


def params_from_json(text: str) -> ModelParams:
    """Accepts ``{p, d, lambda}`` or ``{p, d, a, b, c}``; other keys are ignored."""
    return params_from_dict(json.loads(text))


# -- graphs -----------------------------------------------------------------

def write_edge_list(graph: LabeledGraph, fh, header: dict | None = None) -> None:
    """Edge-list text: optional ``#`` comment lines, then ``n``, then one
    label per vertex, then one ``u v`` pair per edge."""
    if header is not None:
        fh.write("# " + dumps(header) + "\n")
    fh.write(f"{graph.n}\n")
    fh.write("".join(f"{int(x)}\n" for x in graph.labels))
    fh.write("".join(f"{int(u)} {int(v)}\n" for u, v in graph.edges))


def read_edge_list(fh) -> LabeledGraph:
    lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("empty edge list")
    n = int(lines[0])
    if len(lines) < 1 + n:
        raise ValueError(f"expected {n} label lines")
    labels = np.array([int(x) for x in lines[1:1 + n]], dtype=np.int8)
    rows = [ln.split() for ln in lines[1 + n:]]
    if any(len(r) != 2 for r in rows):
        raise ValueError("edge lines must hold exactly two vertex ids")
    edges = np.array(rows, dtype=np.int64).reshape(-1, 2)
    return LabeledGraph(n, edges, labels)


# -- trees ------------------------------------------------------------------

def tree_to_json(tree: LabeledTree, header: dict | None = None) -> str:
    obj = {
        "schema_version": SCHEMA_VERSION,
        "max_depth": int(tree.max_depth),
        "parent": tree.parent.tolist(),
        "labels": tree.labels.tolist(),
    }
    if header is not None:
        obj["config"] = header
    return dumps(obj)


def tree_from_json(text: str) -> LabeledTree:
    obj = json.loads(text)
    parent = np.asarray(obj["parent"], dtype=np.int64)
    depth = np.zeros(len(parent), dtype=np.int64)
    for v in range(1, len(parent)):
        if not 0 <= parent[v] < v:
            raise ValueError("parents must precede their children")
        depth[v] = depth[parent[v]] + 1
    return LabeledTree(parent, depth, np.asarray(obj["labels"], dtype=np.int8),
                       int(obj["max_depth"]))


# -- sweeps and reports -----------------------------------------------------

def csv_text(rows: list[dict], columns: list[str], config: dict) -> str:
    """CSV with a ``# {config}`` header line; ``config`` gains the schema version."""
    buf = io.StringIO()
    buf.write("# " + dumps({"schema_version": SCHEMA_VERSION, **config}) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if row[c] is None else _cell(row[c]) for c in columns])
    return buf.getvalue()


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def read_csv(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`csv_text`: ``(config, rows)`` with string cells."""
    lines = text.splitlines()
    config = {}
    body = []
    for ln in lines:
        if ln.startswith("# "):
            config.update(json.loads(ln[2:]))
        else:
            body.append(ln)
    return config, list(csv.DictReader(body))


def json_report(result: dict, config: dict) -> str:
    return dumps({"schema_version": SCHEMA_VERSION, "config": config, "result": result}) + "\n"


def write_samples(values, fh) -> None:
    """One value per line (``inf``/``-inf`` for revealed atoms)."""
    fh.write("".join(f"{float(x)!r}\n" for x in np.asarray(values)))


def read_samples(fh) -> np.ndarray:
    return np.array([float(ln) for ln in fh if ln.strip()])
