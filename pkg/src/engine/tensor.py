"""
Dense tensor with reverse-mode differentiation.

A Tensor wraps a contiguous numpy array. Tensors produced by a differentiable
operation carry the Node that produced them; `Graph.trace` walks those nodes
back from a loss and returns them in topological order, and `backward`
replays the chain rule over that order.
"""
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float64

_GRAD_ENABLED = True

_DTYPES = {
    "float64": np.float64,
    "float32": np.float32,
}


def resolve_dtype(precision: str) -> np.dtype:
    """Map a config precision name ("float64" / "float32") to a numpy dtype."""
    try:
        return np.dtype(_DTYPES[precision])
    except KeyError:
        raise ValueError(f"unknown precision '{precision}', expected one of {sorted(_DTYPES)}") from None


class Tensor:
    """n-dimensional array with an optional gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad", "_node", "name")

    def __init__(self, data: Any, requires_grad: bool = False, dtype: Optional[np.dtype] = None,
                 name: str = ""):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype if dtype is not None else None)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(dtype or DEFAULT_DTYPE)
        self.data: np.ndarray = np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._node: Optional["Node"] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0

    def backward(self) -> "Graph":
        """Differentiate this scalar with respect to every leaf that requires grad."""
        graph = Graph.trace(self)
        backward(self, graph)
        return graph

    # operator sugar; imported lazily to avoid a cycle with functions.py
    def __add__(self, other: "Tensor") -> "Tensor":
        from engine import functions as F
        return F.add(self, _as_tensor(other, self.dtype))

    __radd__ = __add__

    def __mul__(self, other: float) -> "Tensor":
        from engine import functions as F
        if isinstance(other, Tensor):
            raise TypeError("elementwise tensor products are not supported; multiply by a scalar")
        return F.scale(self, float(other))

    __rmul__ = __mul__

    def sum(self) -> "Tensor":
        from engine import functions as F
        return F.tensor_sum(self)

    def mean(self) -> "Tensor":
        from engine import functions as F
        return F.tensor_mean(self)

    def reshape(self, *shape: int) -> "Tensor":
        from engine import functions as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, tuple(shape))

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        label = f"name={self.name!r}, " if self.name else ""
        return f"Tensor({label}shape={self.shape}, dtype={self.dtype}{flag})"


class Parameter(Tensor):
    """Trainable tensor with a zero-initialized gradient accumulator and a stable name."""

    __slots__ = ()

    def __init__(self, data: Any, name: str, dtype: Optional[np.dtype] = None):
        super().__init__(data, requires_grad=True, dtype=dtype, name=name)
        if not name:
            raise ValueError("parameters need a non-empty name")
        self.grad = np.zeros_like(self.data)


def _as_tensor(value: Any, dtype: np.dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


class Node:
    """One executed differentiable operation: inputs, output and the saved context."""

    __slots__ = ("fn", "inputs", "output", "saved", "needs_input_grad", "__weakref__")

    def __init__(self, fn: type, inputs: Sequence[Any]):
        self.fn = fn
        self.inputs = tuple(inputs)
        self.output: Optional[Tensor] = None
        self.saved: Dict[str, Any] = {}
        self.needs_input_grad = tuple(isinstance(x, Tensor) and x.requires_grad for x in self.inputs)

    def save(self, **values: Any) -> None:
        self.saved.update(values)

    def __getattr__(self, item: str) -> Any:
        try:
            return self.saved[item]
        except KeyError:
            raise AttributeError(item) from None


class Function:
    """
    Base class of differentiable operations.

    Subclasses implement `forward(ctx, *args)` on numpy arrays (tensor
    arguments arrive unwrapped) and `backward(ctx, grad)` returning one
    gradient per positional argument, None for non-tensor or frozen inputs.
    """

    @staticmethod
    def forward(ctx: Node, *args: Any) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *args: Any) -> Tensor:
        ctx = Node(cls, args)
        raw = [a.data if isinstance(a, Tensor) else a for a in args]
        out = cls.forward(ctx, *raw)
        result = Tensor(out, requires_grad=_GRAD_ENABLED and any(ctx.needs_input_grad))
        if result.requires_grad:
            ctx.output = result
            result._node = ctx
        return result


class Graph:
    """Recorded operations reachable from a loss, in topological order (inputs first)."""

    def __init__(self, nodes: List[Node]):
        self.nodes = nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    @classmethod
    def trace(cls, loss: Tensor) -> "Graph":
        order: List[Node] = []
        seen = set()
        if loss._node is None:
            return cls(order)
        # iterative post-order DFS
        stack: List[Tuple[Node, bool]] = [(loss._node, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for inp in node.inputs:
                if isinstance(inp, Tensor) and inp._node is not None and id(inp._node) not in seen:
                    stack.append((inp._node, False))
        return cls(order)

    def leaves(self) -> List[Tensor]:
        found: Dict[int, Tensor] = {}
        for node in self.nodes:
            for inp in node.inputs:
                if isinstance(inp, Tensor) and inp.requires_grad and inp._node is None:
                    found.setdefault(id(inp), inp)
        return list(found.values())


def backward(loss: Tensor, graph: Optional[Graph] = None) -> None:
    """
    Accumulate d(loss)/d(leaf) into `.grad` of every leaf tensor that requires grad.

    Raises:
        ValueError: if the loss is not a scalar.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if graph is None:
        graph = Graph.trace(loss)
    if loss._node is None:
        return

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        out_grad = grads.pop(id(node.output), None)
        if out_grad is None:
            continue
        in_grads = node.fn.backward(node, out_grad)
        if not isinstance(in_grads, tuple):
            in_grads = (in_grads,)
        if len(in_grads) != len(node.inputs):
            raise RuntimeError(f"{node.fn.__name__}.backward returned {len(in_grads)} grads "
                               f"for {len(node.inputs)} inputs")
        for inp, g, needed in zip(node.inputs, in_grads, node.needs_input_grad):
            if not needed or g is None:
                continue
            if g.shape != inp.shape:
                raise RuntimeError(f"{node.fn.__name__} produced grad of shape {g.shape} "
                                   f"for input of shape {inp.shape}")
            if inp._node is None:
                if inp.grad is None:
                    inp.grad = np.zeros_like(inp.data)
                inp.grad += g
            else:
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g


class no_grad:
    """Context manager that stops recording operations (inference, evaluation)."""

    def __enter__(self) -> "no_grad":
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc: Any) -> None:
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev


__all__ = [
    "DEFAULT_DTYPE",
    "Function",
    "Graph",
    "Node",
    "Parameter",
    "Tensor",
    "backward",
    "no_grad",
    "resolve_dtype",
]
