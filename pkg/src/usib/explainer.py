"""Subgraph-bottleneck explainer for a frozen graph encoder.

A generator network scores every edge of a graph, the scores are relaxed
into differentiable edge weights, and a critic network is trained jointly
to tell apart matched and mismatched (weighted subgraph, representation)
pairs. The training objective maximizes that contrastive informativeness
bound while a weighted cross-entropy term prices how many bits the edge
selection itself carries, so the explainer is pushed toward small,
decisive subgraphs that still pin down the representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graphs import Dataset, Graph, GraphBatch, Subgraph, top_n_subgraph, top_r_subgraph
from .encoder import GinEncoder, encode_graphs, _FORMAT, _VERSION, \
    _fill_params, _flatten_params
from .nn import GinLayer, MLP, directed_weight_tensor
from .tensor import Adam, Tensor, concat, no_grad, segment_sum, take_rows

SIGMOID_CLAMP = 1e-7


@dataclass
class UsibHyper:
    """Training knobs: informativeness/compression trade-off ``beta``,
    relaxation temperature ``tau``, and the usual optimization sizes."""

    beta: float = 1.0
    tau: float = 0.1
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 10

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")


class SubgraphGenerator:
    """Edge scorer: a 2-layer node GNN plus an MLP over endpoint pairs."""

    def __init__(self, feature_dim: int, rng: np.random.Generator,
                 hidden_dim: int = 32):
        self.feature_dim = feature_dim
        self.hidden_dim = hidden_dim
        self.gnn = [
            GinLayer(feature_dim, hidden_dim, hidden_dim, rng),
            GinLayer(hidden_dim, hidden_dim, hidden_dim, rng),
        ]
        self.edge_mlp = MLP([2 * hidden_dim, hidden_dim, 1], rng,
                            activation="tanh")

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.gnn for p in layer.parameters()] \
            + self.edge_mlp.parameters()

    def edge_logits(self, batch: GraphBatch) -> Tensor:
        """One logit per canonical edge of the batch, shape (num_edges,)."""
        if batch.features.shape[1] != self.feature_dim:
            raise ValueError(
                f"generator expects feature_dim={self.feature_dim}, "
                f"got {batch.features.shape[1]}")
        ones = Tensor(np.ones(2 * batch.num_edges))
        h = Tensor(batch.features)
        for layer in self.gnn:
            h = layer(h, batch, ones)
        if batch.num_edges == 0:
            return Tensor(np.zeros(0))
        pair = concat([take_rows(h, batch.canon_src),
                       take_rows(h, batch.canon_dst)], axis=-1)
        return self.edge_mlp(pair).reshape(-1)


class MiCritic:
    """Scores (weighted subgraph, representation) pairs with a GNN + MLP."""

    def __init__(self, feature_dim: int, rep_dim: int,
                 rng: np.random.Generator, hidden_dim: int = 32):
        self.feature_dim = feature_dim
        self.rep_dim = rep_dim
        self.hidden_dim = hidden_dim
        self.gnn = [
            GinLayer(feature_dim, hidden_dim, hidden_dim, rng),
            GinLayer(hidden_dim, hidden_dim, hidden_dim, rng),
            GinLayer(hidden_dim, hidden_dim, hidden_dim, rng),
        ]
        self.head = MLP([hidden_dim + rep_dim, hidden_dim, 1], rng,
                        activation="relu")

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.gnn for p in layer.parameters()] \
            + self.head.parameters()

    def encode_subgraphs(self, batch: GraphBatch, edge_weights: Tensor) -> Tensor:
        """Pooled embedding of each relaxed subgraph, (num_graphs, hidden)."""
        directed = directed_weight_tensor(batch, edge_weights)
        h = Tensor(batch.features)
        for layer in self.gnn:
            h = layer(h, batch, directed)
        return segment_sum(h, batch.node_graph_ids, batch.num_graphs)

    def score(self, subgraph_embed: Tensor, reps: Tensor) -> Tensor:
        """Scalar score per (subgraph, representation) row, shape (K,)."""
        if reps.shape[1] != self.rep_dim:
            raise ValueError(
                f"critic expects rep_dim={self.rep_dim}, got {reps.shape[1]}")
        return self.head(concat([subgraph_embed, reps], axis=-1)).reshape(-1)


# -- relaxation ----------------------------------------------------------------

def sample_noise_logits(num: int, rng: np.random.Generator) -> np.ndarray:
    """Logit of uniform noise, one draw per edge, clipped away from 0 and 1."""
    u = np.clip(rng.random(num), 1e-12, 1.0 - 1e-12)
    return np.log(u) - np.log1p(-u)


def relax_with_noise(logits: Tensor, noise_logits: np.ndarray | None,
                     tau: float) -> Tensor:
    """Map edge logits to weights in (0, 1); gradients flow through logits.

    With ``noise_logits=None`` this is the deterministic mean path used at
    inference; with sampled noise it is the binary-concrete reparameterized
    draw whose sharpness grows as ``tau`` shrinks.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if noise_logits is None:
        return (logits * (1.0 / tau)).sigmoid()
    if np.shape(noise_logits) != logits.shape:
        raise ValueError("need one noise draw per edge")
    return ((logits + Tensor(noise_logits)) * (1.0 / tau)).sigmoid()


def concrete_relaxation(logits, tau: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Sampled relaxed edge weights for a plain logit array."""
    logits = np.asarray(logits, dtype=np.float64)
    t = relax_with_noise(Tensor(logits), sample_noise_logits(logits.size, rng),
                         tau)
    return t.data


def relax_graph(graph: Graph, generator: SubgraphGenerator, tau: float,
                rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    """Sampled weighted version of ``graph`` plus the cached edge logits."""
    with no_grad():
        logits = generator.edge_logits(GraphBatch([graph])).data
    weights = concrete_relaxation(logits, tau, rng)
    return graph.with_edge_weights(weights), logits


# -- losses ---------------------------------------------------------------------

def loss_l1(pos_scores: Tensor, neg_scores: Tensor) -> Tensor:
    """Contrastive informativeness bound (to maximize); softplus-scored
    positive pairs minus softplus-scored mismatched pairs."""
    k = pos_scores.shape[0]
    if k < 2:
        raise ValueError("need at least 2 graphs per batch for negative pairs")
    if neg_scores.shape != pos_scores.shape:
        raise ValueError("positive/negative score shapes differ")
    pos = (-((-pos_scores).softplus())).mean()
    neg = neg_scores.softplus().mean()
    return pos - neg


def loss_l2(logits: Tensor, relaxed: Tensor, batch_size: int) -> Tensor:
    """Selection cost (to minimize): cross-entropy between the sampled edge
    weights and their own selection probabilities, summed per graph and
    averaged over the batch. Non-negative by construction."""
    if logits.shape != relaxed.shape:
        raise ValueError("logits and relaxed weights must align")
    if logits.size == 0:
        return Tensor(np.zeros(()))
    mu = logits.sigmoid().clip(SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    ce = relaxed * mu.log() + (1.0 - relaxed) * (1.0 - mu).log()
    return -(ce.sum()) * (1.0 / batch_size)


def _derangement(k: int, rng: np.random.Generator) -> np.ndarray:
    """Random cyclic permutation (Sattolo), so no index maps to itself."""
    perm = np.arange(k)
    for i in range(k - 1, 0, -1):
        j = int(rng.integers(i))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def usib_loss(batch: GraphBatch, reps: np.ndarray, perm: np.ndarray,
              generator: SubgraphGenerator, critic: MiCritic,
              hyper: UsibHyper,
              noise_logits: np.ndarray | None) -> tuple[Tensor, Tensor, Tensor]:
    """One training objective evaluation: returns (loss, l1, l2).

    ``loss`` is the minimized quantity, the negated trade-off between the
    informativeness bound and ``beta`` times the selection cost. ``perm``
    supplies the mismatched representation for each graph; ``noise_logits``
    fixes the relaxation draw (pass None for the deterministic path).
    """
    logits = generator.edge_logits(batch)
    relaxed = relax_with_noise(logits, noise_logits, hyper.tau)
    sub_embed = critic.encode_subgraphs(batch, relaxed)
    rep_t = Tensor(reps)
    pos = critic.score(sub_embed, rep_t)
    neg = critic.score(sub_embed, Tensor(reps[perm]))
    l1 = loss_l1(pos, neg)
    l2 = loss_l2(logits, relaxed, batch.num_graphs)
    return -(l1 - hyper.beta * l2), l1, l2


# -- training and inference ------------------------------------------------------

@dataclass
class TrainHistory:
    l1: list[float] = field(default_factory=list)
    l2: list[float] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)


def _make_batches(n: int, batch_size: int,
                  rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def train_usib(dataset: Dataset, encoder: GinEncoder, hyper: UsibHyper,
               rng: np.random.Generator
               ) -> tuple[SubgraphGenerator, MiCritic, TrainHistory]:
    """Fit generator and critic jointly against the frozen encoder.

    Representations are computed once up front and never receive
    gradients; one optimizer updates both networks each step.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if len(dataset) < 2:
        raise ValueError("need at least 2 graphs for negative pairs")

    reps = encode_graphs(dataset.graphs, encoder)
    generator = SubgraphGenerator(dataset.feature_dim, rng)
    critic = MiCritic(dataset.feature_dim, encoder.rep_dim, rng)
    opt = Adam(generator.parameters() + critic.parameters(), lr=hyper.lr)

    batches = _make_batches(len(dataset), hyper.batch_size, rng)
    history = TrainHistory()
    for _ in range(hyper.epochs):
        for idx in batches:
            batch = GraphBatch([dataset[i] for i in idx])
            noise = sample_noise_logits(batch.num_edges, rng)
            perm = _derangement(len(idx), rng)
            loss, l1, l2 = usib_loss(batch, reps[idx], perm, generator,
                                     critic, hyper, noise)
            opt.zero_grad()
            loss.backward()
            opt.step()
            history.l1.append(l1.item())
            history.l2.append(l2.item())
            history.loss.append(loss.item())
    return generator, critic, history


@dataclass
class ExplanationResult:
    """Edge scores of one graph plus the selected explanatory subgraph."""

    edge_logits: np.ndarray
    edge_weights: np.ndarray
    subgraph: Subgraph


def explain(graph: Graph, generator: SubgraphGenerator, tau: float = 0.1,
            ratio: float | None = None, count: int | None = None
            ) -> ExplanationResult:
    """Deterministic explanation: noise-free relaxed weights, top edges kept.

    Exactly one of ``ratio`` (top share of edges) and ``count`` (top-n
    edges) must be given.
    """
    if (ratio is None) == (count is None):
        raise ValueError("pass exactly one of ratio and count")
    with no_grad():
        logits = generator.edge_logits(GraphBatch([graph])).data
        weights = relax_with_noise(Tensor(logits), None, tau).data
    weighted = graph.with_edge_weights(weights)
    if ratio is not None:
        sub = top_r_subgraph(weighted, ratio)
    else:
        sub = top_n_subgraph(weighted, count)
    return ExplanationResult(edge_logits=logits, edge_weights=weights,
                             subgraph=Subgraph(graph, sub.edge_indices))


def edge_score_fn(generator: SubgraphGenerator, tau: float = 0.1):
    """Per-graph edge score callable in the shape the metrics expect."""
    def scores(graph: Graph) -> np.ndarray:
        with no_grad():
            logits = generator.edge_logits(GraphBatch([graph])).data
        return relax_with_noise(Tensor(logits), None, tau).data
    return scores


# -- checkpointing ---------------------------------------------------------------

def save_explainer(generator: SubgraphGenerator, critic: MiCritic, path,
                   seed: int | None = None) -> None:
    payload = {
        "format": _FORMAT,
        "version": _VERSION,
        "kind": "usib_explainer",
        "feature_dim": generator.feature_dim,
        "generator_hidden": generator.hidden_dim,
        "critic_hidden": critic.hidden_dim,
        "rep_dim": critic.rep_dim,
        "seed": seed,
        "generator_params": _flatten_params(generator.parameters()),
        "critic_params": _flatten_params(critic.parameters()),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_explainer(path) -> tuple[SubgraphGenerator, MiCritic]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"corrupt explainer checkpoint: {exc}") from exc
    for key in ("format", "kind", "feature_dim", "rep_dim",
                "generator_params", "critic_params"):
        if key not in payload:
            raise ValueError(f"explainer checkpoint is missing field '{key}'")
    if payload["format"] != _FORMAT or payload.get("version") != _VERSION:
        raise ValueError("unsupported checkpoint format or version")
    if payload["kind"] != "usib_explainer":
        raise ValueError(f"checkpoint holds a '{payload['kind']}', not an explainer")
    rng = np.random.default_rng(0)
    generator = SubgraphGenerator(payload["feature_dim"], rng,
                                  hidden_dim=payload.get("generator_hidden", 32))
    critic = MiCritic(payload["feature_dim"], payload["rep_dim"], rng,
                      hidden_dim=payload.get("critic_hidden", 32))
    _fill_params(generator.parameters(), payload["generator_params"],
                 "explainer checkpoint (generator)")
    _fill_params(critic.parameters(), payload["critic_params"],
                 "explainer checkpoint (critic)")
    return generator, critic
