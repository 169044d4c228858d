"""Text formats: edge lists, label files, attribute files and embedding files.

All formats are whitespace-separated UTF-8 text; ``#`` starts a comment line
and blank lines are skipped. Node ids are kept as strings.

Dataset directories use the layout ``edges.txt`` (required), ``labels.txt``
and ``features.txt`` (optional).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .evaluation import LabelSet
from .graph import Graph, GraphError, from_edge_list

DATA_ROOT_ENV = "BIGRW_DATA_ROOT"


class FormatError(ValueError):
    """Malformed input file; message carries path and line number."""


@dataclass(frozen=True)
class DatasetBundle:
    graph: Graph
    labels: LabelSet | None = None
    attributes: sp.csr_matrix | None = None
    edge_records: int = 0
    name: str = ""


def _records(path):
    """(line number, fields) for every non-blank, non-comment line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.split()
            if fields and not fields[0].startswith("#"):
                yield lineno, fields


def read_edge_list(path, directed: bool = False, nodes=()) -> Graph:
    """``src dst [weight]`` per line."""
    edges = []
    for lineno, f in _records(path):
        if len(f) not in (2, 3):
            raise FormatError(f"{path}:{lineno}: expected 'src dst [weight]', got {' '.join(f)!r}")
        if len(f) == 3:
            try:
                w = float(f[2])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad weight {f[2]!r}") from None
            if not (w > 0 and np.isfinite(w)):
                raise FormatError(f"{path}:{lineno}: weight must be > 0, got {f[2]}")
            edges.append((f[0], f[1], w))
        else:
            edges.append((f[0], f[1]))
    try:
        return from_edge_list(edges, directed=directed, nodes=nodes)
    except GraphError as exc:
        raise FormatError(f"{path}: {exc}") from None


def read_labels(path, graph: Graph) -> LabelSet:
    """``node label`` or ``node l1,l2,...`` per line; classes numbered in first-appearance order."""
    vocab: dict[str, int] = {}
    per_node: list[tuple[int, ...]] = [()] * graph.node_count
    for lineno, f in _records(path):
        if len(f) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'node label[,label...]'")
        try:
            i = graph.index_of(f[0])
        except KeyError:
            raise FormatError(f"{path}:{lineno}: unknown node id {f[0]!r}") from None
        names = [s for s in f[1].split(",") if s]
        if not names:
            raise FormatError(f"{path}:{lineno}: empty label list")
        ids = tuple(dict.fromkeys(vocab.setdefault(s, len(vocab)) for s in names))
        per_node[i] = tuple(dict.fromkeys(per_node[i] + ids))
    if not vocab:
        raise FormatError(f"{path}: no labels")
    return LabelSet(tuple(per_node), len(vocab), tuple(vocab))


def _sniff_format(path) -> str:
    for _, f in _records(path):
        if len(f) > 1:
            return "sparse" if ":" in f[1] else "dense"
    return "sparse"


def read_attributes(path, graph: Graph, format: str = "auto") -> sp.csr_matrix:
    """Node feature matrix, one row per graph node (missing nodes get zero rows).

    dense: ``node v1 ... vf``. sparse: ``node idx:val ...``; the width is the
    largest index + 1 unless a ``# dim f`` header line sets it.
    """
    if format == "auto":
        format = _sniff_format(path)
    if format not in ("dense", "sparse"):
        raise ValueError(f"format must be 'dense', 'sparse' or 'auto', got {format!r}")
    width = None
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().split()
    if len(head) == 3 and head[0] == "#" and head[1] == "dim":
        width = int(head[2])
    rows, cols, vals = [], [], []
    seen = set()
    for lineno, f in _records(path):
        try:
            i = graph.index_of(f[0])
        except KeyError:
            raise FormatError(f"{path}:{lineno}: unknown node id {f[0]!r}") from None
        if i in seen:
            raise FormatError(f"{path}:{lineno}: duplicate node {f[0]!r}")
        seen.add(i)
        try:
            if format == "dense":
                v = np.array(f[1:], dtype=float)
                if width is None:
                    width = len(v)
                elif len(v) != width:
                    raise FormatError(f"{path}:{lineno}: row has {len(v)} values, expected {width}")
                nz = np.flatnonzero(v)
                rows.extend([i] * len(nz))
                cols.extend(nz.tolist())
                vals.extend(v[nz].tolist())
            else:
                for tok in f[1:]:
                    c, _, x = tok.partition(":")
                    c = int(c)
                    if c < 0:
                        raise FormatError(f"{path}:{lineno}: negative feature index {c}")
                    rows.append(i)
                    cols.append(c)
                    vals.append(float(x))
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not seen:
        raise FormatError(f"{path}: no attribute rows")
    if width is None:
        width = max(cols) + 1
    elif cols and max(cols) >= width:
        raise FormatError(f"{path}: feature index {max(cols)} exceeds declared width {width}")
    if width < 1:
        raise FormatError(f"{path}: zero-width feature matrix")
    X = sp.csr_matrix((vals, (rows, cols)), shape=(graph.node_count, width))
    X.sum_duplicates()
    return X


def write_embeddings(path, embeddings: np.ndarray, node_ids) -> None:
    """Header ``N d`` then ``id v1 ... vd`` per node with 17 significant digits."""
    E = np.asarray(embeddings, dtype=np.float64)
    ids = list(node_ids)
    if E.ndim != 2 or E.shape[0] != len(ids):
        raise ValueError(f"embedding shape {E.shape} does not match {len(ids)} node ids")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{E.shape[0]} {E.shape[1]}\n")
        for nid, row in zip(ids, E):
            fh.write(str(nid) + " " + " ".join(f"{x:.17g}" for x in row) + "\n")


def read_embeddings(path) -> tuple[np.ndarray, list[str]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}:1: expected header 'N d'")
        n, d = int(header[0]), int(header[1])
        ids, rows = [], []
        for lineno, line in enumerate(fh, 2):
            f = line.split()
            if not f:
                continue
            if len(f) != d + 1:
                raise FormatError(f"{path}:{lineno}: expected {d} values, got {len(f) - 1}")
            ids.append(f[0])
            try:
                rows.append([float(x) for x in f[1:]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if len(rows) != n:
        raise FormatError(f"{path}: header says {n} rows, found {len(rows)}")
    return np.array(rows, dtype=np.float64).reshape(n, d), ids


def load_dataset(root, directed: bool = False, feature_format: str = "auto") -> DatasetBundle:
    """Bundle from a directory with ``edges.txt`` and optional ``labels.txt``/``features.txt``.

    A relative ``root`` that does not exist is looked up under ``$BIGRW_DATA_ROOT``.
    """
    root = resolve_data_path(root)
    edges = root / "edges.txt"
    if not edges.exists():
        raise FileNotFoundError(f"{edges} not found")
    g = read_edge_list(edges, directed)
    n_records = sum(1 for _ in _records(edges))
    labels = read_labels(root / "labels.txt", g) if (root / "labels.txt").exists() else None
    feats = root / "features.txt"
    X = read_attributes(feats, g, feature_format) if feats.exists() else None
    return DatasetBundle(g, labels, X, n_records, root.name)


def resolve_data_path(path) -> Path:
    p = Path(path)
    if not p.exists() and not p.is_absolute() and os.environ.get(DATA_ROOT_ENV):
        alt = Path(os.environ[DATA_ROOT_ENV]) / p
        if alt.exists():
            return alt
    return p


def load_linqs(content, cites, directed: bool = False) -> DatasetBundle:
    """Raw LINQS citation data (``<name>.content`` / ``<name>.cites``).

    ``content`` lines are ``paper f1 ... fF class``; ``cites`` lines are
    ``cited citing`` and become arcs citing -> cited. Papers that appear only
    in ``cites`` are kept with zero features and no label.
    """
    ids, feats, classes = [], [], []
    for lineno, f in _records(content):
        if len(f) < 3:
            raise FormatError(f"{content}:{lineno}: too few fields")
        ids.append(f[0])
        feats.append(np.array(f[1:-1], dtype=float))
        classes.append(f[-1])
    width = len(feats[0])
    if any(len(x) != width for x in feats):
        raise FormatError(f"{content}: inconsistent feature widths")
    edges = []
    for lineno, f in _records(cites):
        if len(f) != 2:
            raise FormatError(f"{cites}:{lineno}: expected 'cited citing'")
        edges.append((f[1], f[0]))
    g = from_edge_list(edges, directed=directed, nodes=ids)
    X = sp.lil_matrix((g.node_count, width))
    vocab: dict[str, int] = {}
    per_node: list[tuple[int, ...]] = [()] * g.node_count
    for nid, x, c in zip(ids, feats, classes):
        i = g.index_of(nid)
        X[i] = x
        per_node[i] = (vocab.setdefault(c, len(vocab)),)
    labels = LabelSet(tuple(per_node), len(vocab), tuple(vocab))
    return DatasetBundle(g, labels, X.tocsr(), len(edges), Path(content).stem)


def write_dataset(bundle: DatasetBundle, root) -> None:
    """Write a bundle in the ``edges.txt``/``labels.txt``/``features.txt`` layout."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    g = bundle.graph
    ids = g.node_ids
    with open(root / "edges.txt", "w", encoding="utf-8") as fh:
        for u, v, w in g.arcs():
            if g.directed or u <= v:
                fh.write(f"{ids[u]} {ids[v]} {w:.17g}\n")
    if bundle.labels is not None:
        names = bundle.labels.class_names or tuple(range(bundle.labels.n_classes))
        with open(root / "labels.txt", "w", encoding="utf-8") as fh:
            for i, ls in enumerate(bundle.labels.labels):
                if ls:
                    fh.write(f"{ids[i]} {','.join(str(names[c]) for c in ls)}\n")
    if bundle.attributes is not None:
        X = sp.csr_matrix(bundle.attributes)
        with open(root / "features.txt", "w", encoding="utf-8") as fh:
            fh.write(f"# dim {X.shape[1]}\n")
            for i in range(X.shape[0]):
                row = X[i]
                toks = " ".join(f"{c}:{v:.17g}" for c, v in zip(row.indices, row.data))
                fh.write(f"{ids[i]} {toks}\n".rstrip() + "\n")
