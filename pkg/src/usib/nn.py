"""Small neural building blocks shared by the encoder, generator and critic.

Everything here is built on the tape in :mod:`usib.tensor`; parameters are
plain ``Tensor`` leaves collected via ``parameters()`` so one optimizer can
own any combination of modules.
"""

from __future__ import annotations

import numpy as np

from .graphs import GraphBatch
from .tensor import Tensor, scale_rows, segment_sum, take_rows


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear:
    """Affine map ``x @ W + b`` with Glorot-uniform init and zero bias."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Tensor(glorot(rng, in_dim, out_dim), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        n = x.shape[0]
        out = x @ self.weight
        # Bias as a (1, out) row repeated via reshape-free addition.
        return out + _rows_of(self.bias, n)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


def _rows_of(bias: Tensor, n: int) -> Tensor:
    """Tile a 1-D bias into an (n, d) tensor with an exact adjoint."""
    idx = np.zeros(n, dtype=np.int64)
    return take_rows(bias.reshape(1, -1), idx)


class MLP:
    """Stack of Linear layers with an activation after each hidden layer.

    ``activate_last`` also applies the activation after the final layer,
    which is how the encoder's per-layer transforms are wired.
    """

    def __init__(self, dims: list[int], rng: np.random.Generator,
                 activation: str = "relu", activate_last: bool = False):
        if len(dims) < 2:
            raise ValueError("MLP needs at least input and output dims")
        self.layers = [Linear(dims[i], dims[i + 1], rng)
                       for i in range(len(dims) - 1)]
        if activation not in ("relu", "tanh"):
            raise ValueError(f"unsupported activation '{activation}'")
        self.activation = activation
        self.activate_last = activate_last

    def _act(self, x: Tensor) -> Tensor:
        return x.relu() if self.activation == "relu" else x.tanh()

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.activate_last:
                x = self._act(x)
        return x

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]


class GinLayer:
    """Sum-aggregation message-passing layer with weighted neighbor sums.

    Node update: ``h' = MLP((1 + eps) * h + sum_j w_ij * h_j)`` where the
    sum runs over both orientations of each undirected edge and ``w_ij`` is
    the (possibly relaxed) edge weight. ``eps`` is fixed at 0.
    """

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int,
                 rng: np.random.Generator, eps: float = 0.0):
        self.eps = eps
        self.mlp = MLP([in_dim, hidden_dim, out_dim], rng,
                       activation="relu", activate_last=True)

    def __call__(self, h: Tensor, batch: GraphBatch,
                 directed_weights: Tensor) -> Tensor:
        if batch.num_edges:
            msgs = take_rows(h, batch.directed_src)
            msgs = scale_rows(msgs, directed_weights)
            agg = segment_sum(msgs, batch.directed_dst, batch.num_nodes)
            pre = h * (1.0 + self.eps) + agg
        else:
            pre = h * (1.0 + self.eps)
        return self.mlp(pre)

    def parameters(self) -> list[Tensor]:
        return self.mlp.parameters()


def directed_weight_tensor(batch: GraphBatch,
                           canon_weights: Tensor) -> Tensor:
    """Expand one weight per undirected edge to both directed orientations."""
    return take_rows(canon_weights.reshape(-1, 1),
                     batch.directed_edge_index).reshape(-1)
