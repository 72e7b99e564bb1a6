"""Clustering evaluation: optimally matched accuracy, NMI, ARI, macro F1.

Predicted cluster ids are arbitrary, so accuracy and F1 first match clusters
to classes with the Hungarian algorithm on the contingency table; NMI and ARI
are label-permutation invariant by definition. NMI uses the arithmetic mean
of the two entropies as normalizer; a degenerate single-cluster partition on
either side scores 0 by convention.
"""

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score


def _as_labels(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.size == 0:
        raise ValueError("empty label arrays")
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} labels")
    return pred, truth


def contingency_table(pred, truth):
    """Counts[c, t] = number of nodes in predicted cluster c and true class t."""
    pred, truth = _as_labels(pred, truth)
    pred_vals, pred_idx = np.unique(pred, return_inverse=True)
    truth_vals, truth_idx = np.unique(truth, return_inverse=True)
    counts = np.zeros((pred_vals.size, truth_vals.size), dtype=np.int64)
    np.add.at(counts, (pred_idx, truth_idx), 1)
    return counts, pred_vals, truth_vals


def hungarian_match(pred, truth):
    """Cluster-to-class matching that maximizes the total matched count."""
    counts, pred_vals, truth_vals = contingency_table(pred, truth)
    rows, cols = linear_sum_assignment(-counts)
    return {pred_vals[r]: truth_vals[c] for r, c in zip(rows, cols)}, counts, rows, cols


def accuracy(pred, truth):
    """Fraction of nodes agreeing with the best cluster-to-class matching."""
    pred, truth = _as_labels(pred, truth)
    _, counts, rows, cols = hungarian_match(pred, truth)
    return float(counts[rows, cols].sum()) / pred.size


def macro_f1(pred, truth):
    """Macro-averaged per-class F1 after Hungarian matching of cluster ids.

    Under an injective cluster-to-class matching, each class's F1 depends only
    on its own matched cluster, so matching on the per-pair F1 matrix yields
    the macro-F1 of the best matched labeling; classes left unmatched score 0.
    Reporting that optimum makes the metric exactly invariant to permutations
    of the predicted ids, which matching on raw counts does not guarantee when
    the count-optimal matching is not unique.
    """
    pred, truth = _as_labels(pred, truth)
    counts, _, truth_vals = contingency_table(pred, truth)
    pair_f1 = 2.0 * counts / (counts.sum(axis=1, keepdims=True) + counts.sum(axis=0, keepdims=True))
    rows, cols = linear_sum_assignment(-pair_f1)
    return float(pair_f1[rows, cols].sum()) / truth_vals.size


def nmi(pred, truth):
    pred, truth = _as_labels(pred, truth)
    if np.unique(pred).size == 1 or np.unique(truth).size == 1:
        return 0.0
    return float(normalized_mutual_info_score(truth, pred, average_method="arithmetic"))


def ari(pred, truth):
    pred, truth = _as_labels(pred, truth)
    return float(adjusted_rand_score(truth, pred))


def clustering_report(pred, truth):
    """All four scores as a dict with keys acc, f1, nmi, ari."""
    return {
        "acc": accuracy(pred, truth),
        "f1": macro_f1(pred, truth),
        "nmi": nmi(pred, truth),
        "ari": ari(pred, truth),
    }
