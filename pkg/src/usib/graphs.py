"""Graph containers, subgraph selection, noise injection and serialization.

Graphs are undirected and immutable once built: each edge is stored once as
a canonical ``(i, j)`` pair with ``i < j``, node features are a dense
float64 matrix, and the optional ground-truth explanation mask and the
optional relaxed edge weights are aligned with the edge list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np


class Graph:
    """An undirected graph with node features and optional edge annotations.

    Parameters
    ----------
    num_nodes : int
    node_features : array-like, shape (num_nodes, feature_dim)
    edges : array-like of int pairs
        Undirected edges; pairs are flipped to ``i < j`` and, unless
        ``sort_edges=False``, sorted lexicographically. Self-loops and
        duplicates are rejected.
    label : int or None
        Class index of the graph, when known.
    gt_edge_mask : array-like of bool or None
        Per-edge ground-truth explanation flags, aligned with ``edges``.
    edge_weights : array-like of float or None
        Per-edge weights in [0, 1], aligned with ``edges``.
    sort_edges : bool
        Noise injection appends edges after the originals and therefore
        opts out of sorting; everything else keeps the canonical order.
    """

    __slots__ = ("num_nodes", "node_features", "edges", "label",
                 "gt_edge_mask", "edge_weights")

    def __init__(self, num_nodes: int, node_features, edges,
                 label: int | None = None, gt_edge_mask=None,
                 edge_weights=None, sort_edges: bool = True):
        self.num_nodes = int(num_nodes)
        self.node_features = np.asarray(node_features, dtype=np.float64)
        if self.node_features.ndim != 2 or self.node_features.shape[0] != self.num_nodes:
            raise ValueError(
                f"node_features must have shape ({self.num_nodes}, feature_dim), "
                f"got {self.node_features.shape}")

        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.num_nodes:
                raise ValueError("edges: node index out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("edges: self-loops are not allowed")
            swap = edges[:, 0] > edges[:, 1]
            edges[swap] = edges[swap][:, ::-1]

        order = np.arange(len(edges))
        if sort_edges and len(edges):
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            edges = edges[order]
        if len(edges) > 1:
            keys = edges[:, 0] * self.num_nodes + edges[:, 1]
            if len(np.unique(keys)) != len(keys):
                raise ValueError("edges: duplicate undirected edge")
        self.edges = edges
        self.label = None if label is None else int(label)

        self.gt_edge_mask = None
        if gt_edge_mask is not None:
            mask = np.asarray(gt_edge_mask, dtype=bool)
            if mask.shape != (len(edges),):
                raise ValueError("gt_edge_mask: one flag per edge is required")
            self.gt_edge_mask = mask[order] if sort_edges and len(edges) else mask

        self.edge_weights = None
        if edge_weights is not None:
            w = np.asarray(edge_weights, dtype=np.float64)
            if w.shape != (len(edges),):
                raise ValueError("edge_weights: one weight per edge is required")
            if w.size and (w.min() < -1e-12 or w.max() > 1.0 + 1e-12):
                raise ValueError("edge_weights: values must lie in [0, 1]")
            self.edge_weights = w[order] if sort_edges and len(edges) else w

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.node_features.shape[1]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def with_edge_weights(self, weights) -> "Graph":
        """Copy of this graph carrying the given per-edge weights."""
        return Graph(self.num_nodes, self.node_features, self.edges,
                     label=self.label, gt_edge_mask=self.gt_edge_mask,
                     edge_weights=weights, sort_edges=False)

    def equals(self, other: "Graph") -> bool:
        """Bit-exact structural equality on every field."""
        if self.num_nodes != other.num_nodes or self.label != other.label:
            return False
        if not np.array_equal(self.node_features, other.node_features):
            return False
        if not np.array_equal(self.edges, other.edges):
            return False
        for a, b in ((self.gt_edge_mask, other.gt_edge_mask),
                     (self.edge_weights, other.edge_weights)):
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    def __repr__(self) -> str:
        return (f"Graph(nodes={self.num_nodes}, edges={self.num_edges}, "
                f"label={self.label})")


@dataclass(frozen=True)
class Subgraph:
    """A selection of edges of a parent graph, stored as sorted edge indices."""

    parent: Graph
    edge_indices: np.ndarray

    def __post_init__(self):
        idx = np.unique(np.asarray(self.edge_indices, dtype=np.int64))
        if idx.size != np.asarray(self.edge_indices).size:
            raise ValueError("edge_indices: duplicates are not allowed")
        if idx.size and (idx.min() < 0 or idx.max() >= self.parent.num_edges):
            raise ValueError("edge_indices: index out of range")
        object.__setattr__(self, "edge_indices", idx)

    @property
    def num_edges(self) -> int:
        return len(self.edge_indices)

    def edge_mask(self) -> np.ndarray:
        mask = np.zeros(self.parent.num_edges, dtype=bool)
        mask[self.edge_indices] = True
        return mask


@dataclass
class Dataset:
    """A list of graphs with shared feature dimension plus metadata."""

    graphs: list[Graph]
    name: str = "unnamed"
    num_classes: int = 0
    feature_dim: int = field(default=-1)

    def __post_init__(self):
        if self.graphs:
            dims = {g.feature_dim for g in self.graphs}
            if len(dims) != 1:
                raise ValueError(f"graphs disagree on feature_dim: {sorted(dims)}")
            if self.feature_dim == -1:
                self.feature_dim = dims.pop()
            elif self.feature_dim not in dims:
                raise ValueError("feature_dim does not match the graphs")

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self) -> Iterator[Graph]:
        return iter(self.graphs)

    def __getitem__(self, i: int) -> Graph:
        return self.graphs[i]

    def labels(self) -> np.ndarray:
        if any(g.label is None for g in self.graphs):
            raise ValueError("dataset contains unlabeled graphs")
        return np.array([g.label for g in self.graphs], dtype=np.int64)


# -- subgraph selection ------------------------------------------------------

def _top_k_indices(weights: np.ndarray, k: int) -> np.ndarray:
    # Stable sort on negated weights: ties resolve to the smaller edge index.
    order = np.argsort(-weights, kind="stable")
    return np.sort(order[:k])


def _selection_weights(graph: Graph, scores) -> np.ndarray:
    if scores is not None:
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != (graph.num_edges,):
            raise ValueError("scores must carry one value per edge")
        return scores
    if graph.edge_weights is None:
        raise ValueError("graph has no edge_weights and no scores were given")
    return graph.edge_weights


def top_r_subgraph(graph: Graph, r: float, scores=None) -> Subgraph:
    """Select the ceil(r * |E|) highest-weighted edges, ties to lower index.

    Selection uses ``graph.edge_weights`` unless an explicit per-edge
    ``scores`` array (any real values) is supplied.
    """
    weights = _selection_weights(graph, scores)
    if not (0.0 < r <= 1.0):
        raise ValueError(f"selection ratio must lie in (0, 1], got {r}")
    k = math.ceil(r * graph.num_edges)
    return Subgraph(graph, _top_k_indices(weights, k))


def top_n_subgraph(graph: Graph, n: int, scores=None) -> Subgraph:
    """Select the min(n, |E|) highest-weighted edges, ties to lower index."""
    weights = _selection_weights(graph, scores)
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return Subgraph(graph, _top_k_indices(weights, min(n, graph.num_edges)))


# -- noise injection ---------------------------------------------------------

def add_noise_edges(graph: Graph, count: int, rng: np.random.Generator) -> Graph:
    """Append ``count`` uniformly random new edges to a copy of ``graph``.

    New edges are non-self-loop pairs not already present; the original edge
    list stays as an untouched prefix and the ground-truth mask (if any) is
    extended with ``False`` for every noise edge.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return Graph(graph.num_nodes, graph.node_features, graph.edges,
                     label=graph.label, gt_edge_mask=graph.gt_edge_mask,
                     edge_weights=graph.edge_weights, sort_edges=False)

    existing = {(int(i), int(j)) for i, j in graph.edges}
    free = [(i, j) for i in range(graph.num_nodes)
            for j in range(i + 1, graph.num_nodes) if (i, j) not in existing]
    if count > len(free):
        raise ValueError(
            f"cannot add {count} noise edges: only {len(free)} slots free")
    picked = rng.choice(len(free), size=count, replace=False)
    new_edges = np.vstack([graph.edges.reshape(-1, 2),
                           np.array([free[k] for k in picked], dtype=np.int64)])
    mask = None
    if graph.gt_edge_mask is not None:
        mask = np.concatenate([graph.gt_edge_mask, np.zeros(count, dtype=bool)])
    weights = None
    if graph.edge_weights is not None:
        weights = np.concatenate([graph.edge_weights, np.ones(count)])
    return Graph(graph.num_nodes, graph.node_features, new_edges,
                 label=graph.label, gt_edge_mask=mask, edge_weights=weights,
                 sort_edges=False)


# -- JSON serialization -------------------------------------------------------

def graph_to_dict(graph: Graph) -> dict:
    d = {
        "num_nodes": graph.num_nodes,
        "features": graph.node_features.tolist(),
        "edges": [[int(i), int(j)] for i, j in graph.edges],
        "label": graph.label,
        "gt_edge_mask": None if graph.gt_edge_mask is None
        else [bool(b) for b in graph.gt_edge_mask],
    }
    if graph.edge_weights is not None:
        d["edge_weights"] = graph.edge_weights.tolist()
    return d


def graph_from_dict(d: dict) -> Graph:
    if not isinstance(d, dict):
        raise ValueError("graph record must be a JSON object")
    for key in ("num_nodes", "features", "edges"):
        if key not in d:
            raise ValueError(f"graph record is missing field '{key}'")
    num_nodes = d["num_nodes"]
    if not isinstance(num_nodes, int) or num_nodes < 0:
        raise ValueError("field 'num_nodes' must be a non-negative integer")
    try:
        features = np.asarray(d["features"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValueError("field 'features' must be a numeric matrix") from exc
    edges = d["edges"]
    if not isinstance(edges, list) or any(
            not isinstance(e, list) or len(e) != 2 for e in edges):
        raise ValueError("field 'edges' must be a list of [i, j] pairs")
    label = d.get("label")
    if label is not None and not isinstance(label, int):
        raise ValueError("field 'label' must be an integer or null")
    mask = d.get("gt_edge_mask")
    if mask is not None and (not isinstance(mask, list)
                             or any(not isinstance(b, bool) for b in mask)):
        raise ValueError("field 'gt_edge_mask' must be a list of booleans or null")
    features = features.reshape(num_nodes, -1) if num_nodes else features.reshape(0, 0)
    return Graph(num_nodes, features,
                 np.asarray(edges, dtype=np.int64).reshape(-1, 2),
                 label=label, gt_edge_mask=mask,
                 edge_weights=d.get("edge_weights"), sort_edges=False)


def dataset_to_json(dataset: Dataset) -> str:
    payload = {
        "meta": {
            "name": dataset.name,
            "num_classes": dataset.num_classes,
            "feature_dim": dataset.feature_dim,
        },
        "graphs": [graph_to_dict(g) for g in dataset.graphs],
    }
    return json.dumps(payload, indent=1)


def dataset_from_json(text: str) -> Dataset:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed dataset JSON: {exc}") from exc
    if "meta" not in payload:
        raise ValueError("dataset is missing field 'meta'")
    if "graphs" not in payload:
        raise ValueError("dataset is missing field 'graphs'")
    meta = payload["meta"]
    graphs = [graph_from_dict(d) for d in payload["graphs"]]
    return Dataset(graphs, name=meta.get("name", "unnamed"),
                   num_classes=int(meta.get("num_classes", 0)),
                   feature_dim=int(meta.get("feature_dim", -1)))


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dataset_to_json(dataset))


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return dataset_from_json(fh.read())


# -- DOT export ---------------------------------------------------------------

def export_dot(graph: Graph, explanation: Subgraph | None = None,
               name: str = "g") -> str:
    """Render the graph as Graphviz DOT with the explanation edges in red.

    Nodes incident to ground-truth explanation edges (the motif, when the
    graph carries a mask) are drawn filled so the target structure is
    visible next to what the explainer picked.
    """
    if explanation is not None and explanation.parent is not graph:
        if not np.array_equal(explanation.parent.edges, graph.edges):
            raise ValueError("explanation does not belong to this graph")
    selected = set() if explanation is None else set(
        int(i) for i in explanation.edge_indices)

    motif_nodes: set[int] = set()
    if graph.gt_edge_mask is not None:
        for idx, (i, j) in enumerate(graph.edges):
            if graph.gt_edge_mask[idx]:
                motif_nodes.update((int(i), int(j)))

    lines = [f"graph {name} {{", "  node [shape=circle];"]
    for v in range(graph.num_nodes):
        if v in motif_nodes:
            lines.append(f"  {v} [style=filled, fillcolor=gold];")
        else:
            lines.append(f"  {v};")
    for idx, (i, j) in enumerate(graph.edges):
        if idx in selected:
            lines.append(f"  {i} -- {j} [color=red, penwidth=2.0];")
        else:
            lines.append(f"  {i} -- {j};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- batching for message passing ---------------------------------------------

class GraphBatch:
    """Disjoint union of graphs, laid out for vectorized message passing.

    Node and edge arrays of all member graphs are stacked with offsets;
    ``node_graph_ids`` / ``edge_graph_ids`` map rows back to their graph.
    Each undirected edge appears once in the canonical arrays and twice in
    the directed arrays (both orientations share one weight slot).
    """

    def __init__(self, graphs: Sequence[Graph],
                 edge_weights: Sequence[np.ndarray] | None = None):
        if not graphs:
            raise ValueError("GraphBatch needs at least one graph")
        feats, srcs, dsts, e_gids, n_gids, weights = [], [], [], [], [], []
        node_offset = 0
        self.graphs = list(graphs)
        self.edge_counts = np.array([g.num_edges for g in graphs], dtype=np.int64)
        self.node_counts = np.array([g.num_nodes for g in graphs], dtype=np.int64)
        for gid, g in enumerate(graphs):
            feats.append(g.node_features)
            if g.num_edges:
                srcs.append(g.edges[:, 0] + node_offset)
                dsts.append(g.edges[:, 1] + node_offset)
            e_gids.append(np.full(g.num_edges, gid, dtype=np.int64))
            n_gids.append(np.full(g.num_nodes, gid, dtype=np.int64))
            if edge_weights is not None:
                w = np.asarray(edge_weights[gid], dtype=np.float64)
                if w.shape != (g.num_edges,):
                    raise ValueError("edge weight vector does not match graph")
                weights.append(w)
            elif g.edge_weights is not None:
                weights.append(g.edge_weights)
            else:
                weights.append(np.ones(g.num_edges))
            node_offset += g.num_nodes

        self.num_graphs = len(graphs)
        self.num_nodes = int(node_offset)
        self.features = np.vstack(feats) if feats else np.zeros((0, 0))
        self.canon_src = np.concatenate(srcs) if srcs else np.zeros(0, dtype=np.int64)
        self.canon_dst = np.concatenate(dsts) if dsts else np.zeros(0, dtype=np.int64)
        self.edge_graph_ids = np.concatenate(e_gids)
        self.node_graph_ids = np.concatenate(n_gids)
        self.edge_weights = np.concatenate(weights)
        self.num_edges = len(self.canon_src)
        # Both orientations of every undirected edge, for aggregation.
        self.directed_src = np.concatenate([self.canon_src, self.canon_dst])
        self.directed_dst = np.concatenate([self.canon_dst, self.canon_src])
        self.directed_edge_index = np.concatenate(
            [np.arange(self.num_edges), np.arange(self.num_edges)])
        self.edge_offsets = np.concatenate(
            [[0], np.cumsum(self.edge_counts)]).astype(np.int64)

    def split_edge_values(self, values: np.ndarray) -> list[np.ndarray]:
        """Split a per-canonical-edge vector back into per-graph vectors."""
        return [values[self.edge_offsets[i]:self.edge_offsets[i + 1]]
                for i in range(self.num_graphs)]
