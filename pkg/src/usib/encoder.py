"""The frozen target model: a 3-layer sum-aggregation GNN whose per-layer
outputs are concatenated and add-pooled into one graph-level vector.

Training is contrastive and fully unsupervised: a bilinear discriminator
scores (node state, graph vector) pairs, positives come from a node's own
graph and negatives from other graphs in the batch, and both are pushed
apart through softplus-scored terms. An untrained encoder (random weights)
is a valid target model too; it is simply never fitted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graphs import Dataset, Graph, GraphBatch
from .nn import GinLayer, directed_weight_tensor, glorot
from .tensor import Adam, Tensor, concat, no_grad, segment_sum


class GinEncoder:
    """Stacked weighted GIN layers with concatenated outputs and sum pooling."""

    def __init__(self, feature_dim: int, rng: np.random.Generator,
                 hidden_dim: int = 64, num_layers: int = 3):
        self.feature_dim = feature_dim
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.layers = []
        in_dim = feature_dim
        for _ in range(num_layers):
            self.layers.append(GinLayer(in_dim, hidden_dim, hidden_dim, rng))
            in_dim = hidden_dim

    @property
    def rep_dim(self) -> int:
        return self.hidden_dim * self.num_layers

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]

    def forward(self, batch: GraphBatch,
                edge_weights: Tensor | None = None) -> tuple[Tensor, Tensor]:
        """Return per-node concatenated states (N, rep_dim) and pooled
        graph vectors (num_graphs, rep_dim)."""
        if batch.features.shape[1] != self.feature_dim:
            raise ValueError(
                f"encoder expects feature_dim={self.feature_dim}, "
                f"got {batch.features.shape[1]}")
        if edge_weights is None:
            edge_weights = Tensor(batch.edge_weights)
        if edge_weights.shape != (batch.num_edges,):
            raise ValueError("edge_weights must carry one value per edge")
        directed = directed_weight_tensor(batch, edge_weights)
        h = Tensor(batch.features)
        outs = []
        for layer in self.layers:
            h = layer(h, batch, directed)
            outs.append(h)
        node_states = concat(outs, axis=-1)
        pooled = segment_sum(node_states, batch.node_graph_ids, batch.num_graphs)
        return node_states, pooled


def encode_graph(graph: Graph, encoder: GinEncoder,
                 edge_weights: np.ndarray | None = None) -> np.ndarray:
    """Graph-level representation as a plain (rep_dim,) array."""
    weights = None if edge_weights is None else [np.asarray(edge_weights)]
    with no_grad():
        _, pooled = encoder.forward(GraphBatch([graph], weights))
    return pooled.data[0]


def encode_graphs(graphs, encoder: GinEncoder,
                  edge_weights: list[np.ndarray] | None = None) -> np.ndarray:
    """Representations for many graphs at once, (num_graphs, rep_dim)."""
    graphs = list(graphs)
    if not graphs:
        return np.zeros((0, encoder.rep_dim))
    with no_grad():
        _, pooled = encoder.forward(GraphBatch(graphs, edge_weights))
    return pooled.data


# -- contrastive training ------------------------------------------------------


@dataclass
class EncoderHyper:
    lr: float = 1e-3
    epochs: int = 30
    batch_size: int = 64


def train_infograph(dataset: Dataset, hyper: EncoderHyper,
                    rng: np.random.Generator) -> tuple[GinEncoder, list[float]]:
    """Fit the encoder contrastively; returns it plus per-epoch mean losses."""
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if hyper.batch_size < 2:
        raise ValueError("batch_size must be at least 2 (negatives are in-batch)")

    encoder = GinEncoder(dataset.feature_dim, rng)
    disc = Tensor(glorot(rng, encoder.rep_dim, encoder.rep_dim),
                  requires_grad=True)
    opt = Adam(encoder.parameters() + [disc], lr=hyper.lr)

    losses: list[float] = []
    n = len(dataset)
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            if len(idx) < 2:
                continue
            batch = GraphBatch([dataset[i] for i in idx])
            node_states, pooled = encoder.forward(batch)
            # (num_nodes, num_graphs) pair scores through the bilinear form.
            scores = (node_states @ disc) @ pooled.transpose()
            pos_mask, neg_mask = _pair_masks(batch)
            pos = ((-((-scores).softplus())) * Tensor(pos_mask)).sum() \
                * (1.0 / pos_mask.sum())
            neg = (scores.softplus() * Tensor(neg_mask)).sum() \
                * (1.0 / neg_mask.sum())
            loss = -(pos - neg)
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses.append(loss.item())
        losses.append(float(np.mean(epoch_losses)))
    return encoder, losses


def _pair_masks(batch: GraphBatch) -> tuple[np.ndarray, np.ndarray]:
    pos = np.zeros((batch.num_nodes, batch.num_graphs))
    pos[np.arange(batch.num_nodes), batch.node_graph_ids] = 1.0
    return pos, 1.0 - pos


# -- checkpointing -------------------------------------------------------------

_FORMAT = "usib-checkpoint"
_VERSION = 1


def _flatten_params(params: list[Tensor]) -> list[float]:
    return np.concatenate([p.data.reshape(-1) for p in params]).tolist()


def _fill_params(params: list[Tensor], flat: list[float], what: str) -> None:
    flat = np.asarray(flat, dtype=np.float64)
    total = sum(p.size for p in params)
    if flat.size != total:
        raise ValueError(
            f"{what}: expected {total} parameter values, file has {flat.size}")
    pos = 0
    for p in params:
        p.data = flat[pos:pos + p.size].reshape(p.shape).copy()
        pos += p.size


def save_encoder(encoder: GinEncoder, path, seed: int | None = None) -> None:
    payload = {
        "format": _FORMAT,
        "version": _VERSION,
        "kind": "gin_encoder",
        "feature_dim": encoder.feature_dim,
        "hidden_dim": encoder.hidden_dim,
        "num_layers": encoder.num_layers,
        "seed": seed,
        "params": _flatten_params(encoder.parameters()),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_encoder(path) -> GinEncoder:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"corrupt encoder checkpoint: {exc}") from exc
    for key in ("format", "kind", "feature_dim", "hidden_dim", "num_layers",
                "params"):
        if key not in payload:
            raise ValueError(f"encoder checkpoint is missing field '{key}'")
    if payload["format"] != _FORMAT or payload.get("version") != _VERSION:
        raise ValueError("unsupported checkpoint format or version")
    if payload["kind"] != "gin_encoder":
        raise ValueError(f"checkpoint holds a '{payload['kind']}', not an encoder")
    encoder = GinEncoder(payload["feature_dim"], np.random.default_rng(0),
                         hidden_dim=payload["hidden_dim"],
                         num_layers=payload["num_layers"])
    _fill_params(encoder.parameters(), payload["params"], "encoder checkpoint")
    return encoder
