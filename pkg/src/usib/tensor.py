"""Dense float64 tensors with reverse-mode automatic differentiation.

A define-by-run tape: every operation on tensors that require gradients
records a backward closure, and ``Tensor.backward()`` walks the recorded
graph once in reverse topological order. The op set is deliberately small
(what message passing, pooling and the losses in this package need) and
there is no broadcasting beyond tensor-with-scalar; anything else must be
reshaped explicitly.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Sequence

import numpy as np

Array = np.ndarray

_grad_enabled = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording inside the block (inference-only forwards)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    """A numpy array plus the bookkeeping needed for reverse-mode autodiff.

    Parameters
    ----------
    data : array-like
        Values, converted to a float64 ndarray.
    requires_grad : bool
        Whether gradients should be accumulated into ``self.grad`` during a
        backward pass. Derived tensors inherit this from their parents.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], None] | None = None

    # -- construction of derived tensors ---------------------------------

    @staticmethod
    def _result(data: Array, parents: Sequence["Tensor"],
                backward: Callable[[Array], None]) -> "Tensor":
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _accumulate(self, g: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- basic properties -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def assert_finite(self, context: str = "tensor") -> "Tensor":
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"non-finite values in {context}")
        return self

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- elementwise arithmetic (same shape or scalar) ---------------------

    @staticmethod
    def _coerce(other) -> "Tensor | float":
        if isinstance(other, Tensor):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return float(other)
        raise TypeError(f"cannot combine Tensor with {type(other).__name__}")

    @staticmethod
    def _check_same_shape(a: "Tensor", b: "Tensor", op: str) -> None:
        if a.shape != b.shape:
            raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")

    def __add__(self, other):
        other = self._coerce(other)
        if isinstance(other, float):
            def bwd(g, a=self):
                a.requires_grad and a._accumulate(g)
            return self._result(self.data + other, (self,), bwd)
        self._check_same_shape(self, other, "add")

        def bwd(g, a=self, b=other):
            a.requires_grad and a._accumulate(g)
            b.requires_grad and b._accumulate(g)
        return self._result(self.data + other.data, (self, other), bwd)

    __radd__ = __add__

    def __neg__(self):
        def bwd(g, a=self):
            a.requires_grad and a._accumulate(-g)
        return self._result(-self.data, (self,), bwd)

    def __sub__(self, other):
        other = self._coerce(other)
        if isinstance(other, float):
            return self + (-other)
        self._check_same_shape(self, other, "subtract")

        def bwd(g, a=self, b=other):
            a.requires_grad and a._accumulate(g)
            b.requires_grad and b._accumulate(-g)
        return self._result(self.data - other.data, (self, other), bwd)

    def __rsub__(self, other):
        return (-self) + self._coerce(other)

    def __mul__(self, other):
        other = self._coerce(other)
        if isinstance(other, float):
            def bwd(g, a=self, c=other):
                a.requires_grad and a._accumulate(g * c)
            return self._result(self.data * other, (self,), bwd)
        self._check_same_shape(self, other, "multiply")

        def bwd(g, a=self, b=other):
            a.requires_grad and a._accumulate(g * b.data)
            b.requires_grad and b._accumulate(g * a.data)
        return self._result(self.data * other.data, (self, other), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if not isinstance(other, float):
            raise TypeError("tensor/tensor division is not supported; "
                            "multiply by a reciprocal instead")
        return self * (1.0 / other)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("exponent must be a plain number")
        p = float(p)

        def bwd(g, a=self, p=p):
            a.requires_grad and a._accumulate(g * p * a.data ** (p - 1.0))
        return self._result(self.data ** p, (self,), bwd)

    # -- linear algebra ----------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        if not isinstance(other, Tensor):
            raise TypeError("matmul expects a Tensor")
        if self.ndim != 2 or other.ndim != 2:
            raise ValueError("matmul is defined for 2-D tensors only")
        if self.shape[1] != other.shape[0]:
            raise ValueError(
                f"matmul: inner dimensions differ {self.shape} @ {other.shape}")

        def bwd(g, a=self, b=other):
            a.requires_grad and a._accumulate(g @ b.data.T)
            b.requires_grad and b._accumulate(a.data.T @ g)
        return self._result(self.data @ other.data, (self, other), bwd)

    __matmul__ = matmul

    def transpose(self) -> "Tensor":
        if self.ndim != 2:
            raise ValueError("transpose is defined for 2-D tensors only")

        def bwd(g, a=self):
            a.requires_grad and a._accumulate(g.T)
        return self._result(self.data.T.copy(), (self,), bwd)

    # -- nonlinearities ----------------------------------------------------

    def relu(self) -> "Tensor":
        mask = self.data > 0.0

        def bwd(g, a=self, mask=mask):
            a.requires_grad and a._accumulate(g * mask)
        return self._result(self.data * mask, (self,), bwd)

    def tanh(self) -> "Tensor":
        y = np.tanh(self.data)

        def bwd(g, a=self, y=y):
            a.requires_grad and a._accumulate(g * (1.0 - y * y))
        return self._result(y, (self,), bwd)

    def sigmoid(self) -> "Tensor":
        y = _sigmoid(self.data)

        def bwd(g, a=self, y=y):
            a.requires_grad and a._accumulate(g * y * (1.0 - y))
        return self._result(y, (self,), bwd)

    def softplus(self) -> "Tensor":
        # max(x, 0) + log1p(exp(-|x|)) never overflows; derivative is sigmoid.
        y = np.maximum(self.data, 0.0) + np.log1p(np.exp(-np.abs(self.data)))

        def bwd(g, a=self):
            a.requires_grad and a._accumulate(g * _sigmoid(a.data))
        return self._result(y, (self,), bwd)

    def log(self) -> "Tensor":
        if np.any(self.data <= 0.0):
            raise ValueError("log: input must be strictly positive")

        def bwd(g, a=self):
            a.requires_grad and a._accumulate(g / a.data)
        return self._result(np.log(self.data), (self,), bwd)

    def exp(self) -> "Tensor":
        y = np.exp(self.data)

        def bwd(g, a=self, y=y):
            a.requires_grad and a._accumulate(g * y)
        return self._result(y, (self,), bwd)

    def clip(self, lo: float, hi: float) -> "Tensor":
        """Clamp values to [lo, hi]; gradient is zero where clamping bites."""
        inside = (self.data >= lo) & (self.data <= hi)

        def bwd(g, a=self, inside=inside):
            a.requires_grad and a._accumulate(g * inside)
        return self._result(np.clip(self.data, lo, hi), (self,), bwd)

    def sqrt(self) -> "Tensor":
        if np.any(self.data < 0.0):
            raise ValueError("sqrt: input must be non-negative")
        y = np.sqrt(self.data)

        def bwd(g, a=self, y=y):
            a.requires_grad and a._accumulate(g * 0.5 / y)
        return self._result(y, (self,), bwd)

    # -- shape and reductions ----------------------------------------------

    def reshape(self, *shape: int) -> "Tensor":
        old = self.shape

        def bwd(g, a=self, old=old):
            a.requires_grad and a._accumulate(g.reshape(old))
        return self._result(self.data.reshape(*shape), (self,), bwd)

    def sum(self, axis: int | None = None) -> "Tensor":
        if axis is None:
            def bwd(g, a=self):
                a.requires_grad and a._accumulate(np.full_like(a.data, g))
            return self._result(np.asarray(self.data.sum()), (self,), bwd)

        def bwd(g, a=self, axis=axis):
            a.requires_grad and a._accumulate(
                np.repeat(np.expand_dims(g, axis), a.shape[axis], axis=axis))
        return self._result(self.data.sum(axis=axis), (self,), bwd)

    def mean(self, axis: int | None = None) -> "Tensor":
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    # -- backward ----------------------------------------------------------

    def backward(self) -> None:
        """Run reverse-mode differentiation from this scalar.

        Gradients accumulate into ``.grad`` of every reachable tensor with
        ``requires_grad``. Each recorded operation is visited exactly once;
        a fresh forward pass builds a fresh graph, so the tape is effectively
        consumed here.
        """
        if self.size != 1:
            raise ValueError(f"backward requires a scalar, got shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("backward on a tensor that does not require grad")
        self.assert_finite("loss")

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)


def _sigmoid(x: Array) -> Array:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# -- structural ops ---------------------------------------------------------

def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate tensors along an axis (default: last)."""
    if not tensors:
        raise ValueError("concat of an empty sequence")
    datas = [t.data for t in tensors]
    splits = np.cumsum([d.shape[axis] for d in datas])[:-1]

    def bwd(g, parts=tuple(tensors), splits=splits, axis=axis):
        for part, piece in zip(parts, np.split(g, splits, axis=axis)):
            part.requires_grad and part._accumulate(piece)
    return Tensor._result(np.concatenate(datas, axis=axis), tensors, bwd)


def take_rows(x: Tensor, index: Array) -> Tensor:
    """Gather rows ``x[index]``; the adjoint scatter-adds back into place."""
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[0]):
        raise ValueError("take_rows: index out of range")

    def bwd(g, a=x, index=index):
        if a.requires_grad:
            out = np.zeros_like(a.data)
            np.add.at(out, index, g)
            a._accumulate(out)
    return Tensor._result(x.data[index], (x,), bwd)


def segment_sum(x: Tensor, segment_ids: Array, num_segments: int) -> Tensor:
    """Scatter-add rows of ``x`` into ``num_segments`` buckets.

    The workhorse of message passing (aggregate messages per target node)
    and of graph pooling (sum node states per graph). ``x`` may be 1-D or
    2-D; ``segment_ids`` gives the bucket of each row.
    """
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.shape != (x.shape[0],):
        raise ValueError("segment_sum: one segment id per row is required")
    if segment_ids.size and (segment_ids.min() < 0 or segment_ids.max() >= num_segments):
        raise ValueError("segment_sum: segment id out of range")
    out_shape = (num_segments,) + x.shape[1:]
    out = np.zeros(out_shape, dtype=np.float64)
    np.add.at(out, segment_ids, x.data)

    def bwd(g, a=x, segment_ids=segment_ids):
        a.requires_grad and a._accumulate(g[segment_ids])
    return Tensor._result(out, (x,), bwd)


def scale_rows(x: Tensor, s: Tensor) -> Tensor:
    """Multiply each row of a 2-D tensor by a per-row scalar.

    Covers the one place a non-scalar broadcast would otherwise be needed:
    weighting per-edge messages by per-edge weights.
    """
    if x.ndim != 2 or s.ndim != 1 or s.shape[0] != x.shape[0]:
        raise ValueError(
            f"scale_rows: need (n, d) and (n,), got {x.shape} and {s.shape}")

    def bwd(g, a=x, b=s):
        a.requires_grad and a._accumulate(g * b.data[:, None])
        b.requires_grad and b._accumulate((g * a.data).sum(axis=1))
    return Tensor._result(x.data * s.data[:, None], (x, s), bwd)


# -- optimizer ---------------------------------------------------------------

class Adam:
    """Adam with bias correction over a fixed list of parameter tensors."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        if not all(p.requires_grad for p in self.params):
            raise ValueError("Adam: every parameter must require grad")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        """Apply one update; parameters with ``grad is None`` are skipped."""
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            if g.shape != p.data.shape:
                raise ValueError("Adam: gradient/parameter shape mismatch")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** t)
            v_hat = v / (1.0 - b2 ** t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
