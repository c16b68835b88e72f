"""Gradient-based edge scorers and a random floor.

All three gradient methods differentiate the l2 norm of the graph-level
representation with respect to the edge weights: the saliency baseline
keeps absolute gradients, the gradient-times-input variant multiplies by
the weights, and the integrated variant averages gradients along the path
from an all-zero edge weighting to the actual one.
"""

from __future__ import annotations

import numpy as np

from .encoder import GinEncoder
from .graphs import Graph, GraphBatch
from .tensor import Tensor


def _rep_norm_and_grad(graph: Graph, encoder: GinEncoder,
                       weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and gradient of ||Z(graph, weights)||_2 w.r.t. the edge weights."""
    batch = GraphBatch([graph])
    w = Tensor(weights, requires_grad=True)
    _, pooled = encoder.forward(batch, edge_weights=w)
    norm = (pooled * pooled).sum().sqrt()
    norm.backward()
    grad = w.grad if w.grad is not None else np.zeros_like(weights)
    return norm.item(), grad


def sa_explain(graph: Graph, encoder: GinEncoder) -> np.ndarray:
    """Absolute representation-norm gradient per edge, taken at weights 1."""
    if graph.num_edges == 0:
        return np.zeros(0)
    _, grad = _rep_norm_and_grad(graph, encoder, np.ones(graph.num_edges))
    return np.abs(grad)


def gradcam_explain(graph: Graph, encoder: GinEncoder) -> np.ndarray:
    """Signed gradient times edge weight (the graph's own weights, or 1)."""
    if graph.num_edges == 0:
        return np.zeros(0)
    weights = graph.edge_weights if graph.edge_weights is not None \
        else np.ones(graph.num_edges)
    _, grad = _rep_norm_and_grad(graph, encoder, np.asarray(weights, dtype=np.float64))
    return grad * weights


def ig_explain(graph: Graph, encoder: GinEncoder, steps: int = 50) -> np.ndarray:
    """Midpoint-rule path integral of the gradient from zero weights to ones."""
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if graph.num_edges == 0:
        return np.zeros(0)
    total = np.zeros(graph.num_edges)
    for t in range(1, steps + 1):
        alpha = (t - 0.5) / steps
        _, grad = _rep_norm_and_grad(graph, encoder,
                                     np.full(graph.num_edges, alpha))
        total += grad
    return total / steps


def random_explain(graph: Graph, rng: np.random.Generator) -> np.ndarray:
    """Uniform scores in [0, 1); the floor every real method must beat."""
    return rng.random(graph.num_edges)
