"""Converters from common public dataset releases to the on-disk format.

Two sources are covered:

* MATLAB ``.mat`` bundles (the usual distribution of the multilayer citation
  and co-purchase benchmarks): one adjacency per relation key, a shared
  feature matrix, and a label vector.
* ``content``/``cites`` text pairs (the classic citation-network layout):
  node features and string labels in one file, edges by paper id in the other.

Run as a module::

    python -m mgclust.convert mat ACM.mat data/acm --edges PAP,PLP
    python -m mgclust.convert content cora.content cora.cites data/cora --similarity-view
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .data import GraphLayer, MultilayerGraph, save_multilayer_graph
from .errors import DatasetError

_EDGE_KEY_GUESSES = ("PAP", "PSP", "PLP", "PPP", "MAM", "MDM", "IVI", "IBI", "IOI", "A", "adj")
_ATTR_KEY_GUESSES = ("feature", "features", "attrs", "fea", "X")
_LABEL_KEY_GUESSES = ("label", "labels", "gnd", "Y")


def _to_adjacency(raw, n_nodes=None):
    mat = sp.csr_matrix(raw).astype(np.float64)
    if n_nodes is not None and mat.shape != (n_nodes, n_nodes):
        raise DatasetError(f"adjacency shape {mat.shape} does not match n_nodes={n_nodes}")
    mat = mat.maximum(mat.T)
    mat.setdiag(0)
    mat.eliminate_zeros()
    mat.data[:] = 1.0
    mat.sort_indices()
    return mat


def _guess_key(available, requested, guesses, what):
    if requested:
        keys = [k.strip() for k in requested.split(",")]
        missing = [k for k in keys if k not in available]
        if missing:
            raise DatasetError(f"{what} keys not in file: {missing} (available: {sorted(available)})")
        return keys
    keys = [k for k in guesses if k in available]
    if not keys:
        raise DatasetError(f"could not guess {what} key; available: {sorted(available)}")
    return keys


def convert_mat(mat_path, out_dir, edge_keys=None, attr_key=None, label_key=None,
                similarity_view=False):
    """Convert a .mat bundle; returns the written dataset directory."""
    from scipy.io import loadmat

    raw = {k: v for k, v in loadmat(str(mat_path)).items() if not k.startswith("__")}
    e_keys = _guess_key(raw, edge_keys, _EDGE_KEY_GUESSES, "edge")
    a_key = _guess_key(raw, attr_key, _ATTR_KEY_GUESSES, "attribute")[0]
    attributes = np.asarray(sp.csr_matrix(raw[a_key]).todense(), dtype=np.float64)
    n_nodes = attributes.shape[0]
    layers = [GraphLayer(adjacency=_to_adjacency(raw[k], n_nodes), attributes=attributes)
              for k in e_keys]

    labels = None
    k_classes = 1
    l_keys = [k for k in _LABEL_KEY_GUESSES if k in raw] if label_key is None else [label_key]
    if l_keys:
        labels = np.asarray(raw[l_keys[0]]).ravel().astype(np.int64)
        if labels.size != n_nodes:
            raise DatasetError(f"label count {labels.size} does not match n_nodes={n_nodes}")
        if labels.min() == 1:
            labels = labels - 1
        k_classes = int(labels.max()) + 1

    g = MultilayerGraph(n_nodes=n_nodes, layers=layers, k_classes=k_classes,
                        labels=labels, shared_attributes=True).validate()
    out = save_multilayer_graph(g, out_dir)
    if similarity_view:
        _set_similarity_flag(out)
    return out


def convert_content(content_path, cites_path, out_dir, similarity_view=False):
    """Convert a content/cites pair; returns the written dataset directory."""
    ids, rows, label_names = [], [], []
    for line in Path(content_path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        ids.append(parts[0])
        rows.append([float(v) for v in parts[1:-1]])
        label_names.append(parts[-1])
    if not ids:
        raise DatasetError(f"{content_path}: no records")
    index = {pid: i for i, pid in enumerate(ids)}
    if len(index) != len(ids):
        raise DatasetError(f"{content_path}: duplicate node ids")
    attributes = np.asarray(rows, dtype=np.float64)
    classes = sorted(set(label_names))
    labels = np.asarray([classes.index(name) for name in label_names], dtype=np.int64)

    n = len(ids)
    src, dst = [], []
    for line in Path(cites_path).read_text().splitlines():
        parts = line.split()
        if len(parts) != 2:
            continue
        a, b = index.get(parts[0]), index.get(parts[1])
        if a is None or b is None or a == b:
            continue
        src.append(a)
        dst.append(b)
    adjacency = _to_adjacency(sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n)), n)

    g = MultilayerGraph(n_nodes=n, layers=[GraphLayer(adjacency=adjacency, attributes=attributes)],
                        k_classes=len(classes), labels=labels).validate()
    out = save_multilayer_graph(g, out_dir)
    if similarity_view:
        _set_similarity_flag(out)
    return out


def _set_similarity_flag(dataset_dir):
    manifest_path = Path(dataset_dir) / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    manifest["similarity_view"] = True
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="python -m mgclust.convert")
    sub = parser.add_subparsers(dest="source", required=True)

    p_mat = sub.add_parser("mat")
    p_mat.add_argument("mat_path")
    p_mat.add_argument("out_dir")
    p_mat.add_argument("--edges", default=None, help="comma-separated adjacency keys")
    p_mat.add_argument("--attributes", default=None)
    p_mat.add_argument("--labels", default=None)
    p_mat.add_argument("--similarity-view", action="store_true")

    p_content = sub.add_parser("content")
    p_content.add_argument("content_path")
    p_content.add_argument("cites_path")
    p_content.add_argument("out_dir")
    p_content.add_argument("--similarity-view", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.source == "mat":
            out = convert_mat(args.mat_path, args.out_dir, edge_keys=args.edges,
                              attr_key=args.attributes, label_key=args.labels,
                              similarity_view=args.similarity_view)
        else:
            out = convert_content(args.content_path, args.cites_path, args.out_dir,
                                  similarity_view=args.similarity_view)
    except (DatasetError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote dataset to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
