"""Quantitative evaluation of edge-score explainers.

Two views of quality: how much of the ground-truth explanation the top-n
edges recover (recall), and how well a linear probe can still classify
graphs after the encoder only sees the selected edges (accuracy at a
selection ratio, and the area under that curve). The probe is a fixed,
fully deterministic multinomial logistic regression so that identical
seeds give byte-identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import GinEncoder, encode_graphs
from .graphs import (Dataset, Graph, Subgraph, add_noise_edges,
                     top_n_subgraph, top_r_subgraph)
from .seeding import substream

RATIO_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


# -- recall ---------------------------------------------------------------------

def recall_at_n(explanation: Subgraph, gt_edge_mask=None) -> float:
    """Share of ground-truth edges contained in the selection."""
    mask = explanation.parent.gt_edge_mask if gt_edge_mask is None \
        else np.asarray(gt_edge_mask, dtype=bool)
    if mask is None:
        raise ValueError("graph has no ground-truth edge mask")
    if mask.shape != (explanation.parent.num_edges,):
        raise ValueError("ground-truth mask does not match the edge list")
    total = int(mask.sum())
    if total == 0:
        raise ValueError("ground-truth mask is empty")
    hit = int(mask[explanation.edge_indices].sum())
    return hit / total


# -- deterministic logistic probe -------------------------------------------------

def stratified_folds(labels: np.ndarray, folds: int,
                     rng: np.random.Generator) -> list[np.ndarray]:
    """Partition indices into ``folds`` test sets, class-balanced."""
    labels = np.asarray(labels)
    if len(labels) < folds:
        raise ValueError(f"need at least {folds} samples for {folds} folds")
    assignment = np.empty(len(labels), dtype=np.int64)
    cursor = 0
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        # Deal the shuffled class members round-robin across folds, rotating
        # the starting fold so small classes do not pile onto fold 0.
        assignment[idx] = (np.arange(len(idx)) + cursor) % folds
        cursor += len(idx)
    out = [np.flatnonzero(assignment == f) for f in range(folds)]
    if any(len(fold) == 0 for fold in out):
        raise ValueError("a fold came out empty; too few samples")
    return out


def _fit_logistic(x: np.ndarray, y: np.ndarray, num_classes: int,
                  lr: float = 0.1, iters: int = 500,
                  l2: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    n, d = x.shape
    onehot = np.zeros((n, num_classes))
    onehot[np.arange(n), y] = 1.0
    w = np.zeros((d, num_classes))
    b = np.zeros(num_classes)
    for _ in range(iters):
        logits = x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        err = (p - onehot) / n
        w -= lr * (x.T @ err + l2 * w)
        b -= lr * err.sum(axis=0)
    return w, b


def train_logistic_cv(reps: np.ndarray, labels: np.ndarray, folds: int = 10,
                      rng: np.random.Generator | None = None) -> float:
    """Mean stratified k-fold test accuracy of a multinomial logistic probe.

    Features are standardized with training-fold statistics; the probe
    itself is plain full-batch gradient descent with a small l2 penalty,
    chosen over fancier solvers because it is bitwise reproducible.
    """
    reps = np.asarray(reps, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if rng is None:
        rng = np.random.default_rng(0)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("need at least 2 classes to probe")
    num_classes = int(labels.max()) + 1
    accs = []
    for test_idx in stratified_folds(labels, folds, rng):
        train_mask = np.ones(len(labels), dtype=bool)
        train_mask[test_idx] = False
        x_tr, y_tr = reps[train_mask], labels[train_mask]
        if len(np.unique(y_tr)) < len(classes):
            raise ValueError("a training fold lost a class entirely")
        mean = x_tr.mean(axis=0)
        std = x_tr.std(axis=0)
        std[std < 1e-12] = 1.0
        w, b = _fit_logistic((x_tr - mean) / std, y_tr, num_classes)
        logits = ((reps[test_idx] - mean) / std) @ w + b
        accs.append(float(np.mean(logits.argmax(axis=1) == labels[test_idx])))
    return float(np.mean(accs))


# -- accuracy at a selection ratio -------------------------------------------------

def subgraph_weights(graph: Graph, scores: np.ndarray, r: float) -> np.ndarray:
    """0/1 edge weights keeping the top-r edges by score (all nodes stay)."""
    sub = top_r_subgraph(graph, r, scores=scores)
    return sub.edge_mask().astype(np.float64)


def acc_at_r(dataset: Dataset, edge_scores: list[np.ndarray],
             encoder: GinEncoder, r: float, seed: int,
             folds: int = 10) -> float:
    """Probe accuracy after re-encoding every graph's top-r subgraph."""
    if len(edge_scores) != len(dataset):
        raise ValueError("need one score vector per graph")
    weights = [subgraph_weights(g, s, r)
               for g, s in zip(dataset.graphs, edge_scores)]
    reps = encode_graphs(dataset.graphs, encoder, weights)
    return train_logistic_cv(reps, dataset.labels(), folds=folds,
                             rng=substream(seed, f"probe/r={r:.1f}"))


def acc_auc(acc_values) -> float:
    """Area under the accuracy curve on the ratio grid, normalized to [0, 1]."""
    acc_values = np.asarray(acc_values, dtype=np.float64)
    if acc_values.shape != (len(RATIO_GRID),):
        raise ValueError(
            f"expected {len(RATIO_GRID)} accuracy values, got {acc_values.shape}")
    grid = np.asarray(RATIO_GRID)
    return float(np.trapezoid(acc_values, grid) / (grid[-1] - grid[0]))


# -- per-method evaluation ----------------------------------------------------------

@dataclass
class MethodMetrics:
    """Everything reported for one explainer on one dataset."""

    method: str
    recall_mean: float
    recall_std: float
    accs: list[float]
    acc_auc: float
    runtime_seconds: float = 0.0


@dataclass
class MetricReport:
    """Bundle of per-method metrics plus run metadata."""

    dataset: str
    seed: int
    encoder_id: str
    beta: float | None
    recall_n: int
    methods: list[MethodMetrics] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "seed": self.seed,
            "encoder_id": self.encoder_id,
            "beta": self.beta,
            "recall_n": self.recall_n,
            "ratio_grid": list(RATIO_GRID),
            "methods": [
                {
                    "method": m.method,
                    "recall_mean": m.recall_mean,
                    "recall_std": m.recall_std,
                    "acc_at_r": m.accs,
                    "acc_auc": m.acc_auc,
                }
                for m in self.methods
            ],
        }


def evaluate_scores(dataset: Dataset, method: str,
                    edge_scores: list[np.ndarray], encoder: GinEncoder,
                    seed: int, recall_n: int = 5,
                    folds: int = 10) -> MethodMetrics:
    """Recall@n plus the full accuracy curve for one score assignment."""
    recalls = []
    for g, s in zip(dataset.graphs, edge_scores):
        if g.gt_edge_mask is not None and g.gt_edge_mask.any():
            recalls.append(recall_at_n(top_n_subgraph(g, recall_n, scores=s)))
    accs = [acc_at_r(dataset, edge_scores, encoder, r, seed, folds=folds)
            for r in RATIO_GRID]
    return MethodMetrics(
        method=method,
        recall_mean=float(np.mean(recalls)) if recalls else float("nan"),
        recall_std=float(np.std(recalls)) if recalls else float("nan"),
        accs=[float(a) for a in accs],
        acc_auc=acc_auc(accs),
    )


# -- robustness of the encoder -------------------------------------------------------

def robustness_study(dataset: Dataset, encoder: GinEncoder, seed: int,
                     noise_per_graph: int | None = None,
                     folds: int = 10) -> tuple[float, float]:
    """Probe accuracy on clean graphs and on graphs with added noise edges.

    By default every graph receives as many noise edges as it has real
    ones; the two probes use identical fold assignments so the comparison
    isolates the representation change.
    """
    noise_rng = substream(seed, "robustness/noise")
    noisy = []
    for g in dataset.graphs:
        count = g.num_edges if noise_per_graph is None else noise_per_graph
        noisy.append(add_noise_edges(g, count, noise_rng))
    labels = dataset.labels()
    clean_reps = encode_graphs(dataset.graphs, encoder)
    noisy_reps = encode_graphs(noisy, encoder)
    acc_clean = train_logistic_cv(clean_reps, labels, folds=folds,
                                  rng=substream(seed, "robustness/probe"))
    acc_noisy = train_logistic_cv(noisy_reps, labels, folds=folds,
                                  rng=substream(seed, "robustness/probe"))
    return acc_clean, acc_noisy
