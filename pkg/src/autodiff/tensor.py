"""
Tensor values and the reverse-mode differentiation tape.

A Tensor wraps an immutable numpy array. When at least one input of an
operation was recorded on a Tape, the result is recorded too, together with a
closure that maps the output gradient to input gradients. ``Tape.backward``
walks the nodes in reverse order of creation, which is a valid reverse
topological order because parents are always recorded before children.
"""

from __future__ import annotations

import contextlib
import contextvars
import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.pipeline.errors import NumericalError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_DEFAULT_DTYPE: contextvars.ContextVar = contextvars.ContextVar("default_dtype", default=np.float32)
_TAPE_IDS = itertools.count()


def default_dtype() -> np.dtype:
    return np.dtype(_DEFAULT_DTYPE.get())


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Switch the dtype new tensors are created with (float32 or float64)."""
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ShapeError(f"Unsupported precision {dtype}; use float32 or float64")
    token = _DEFAULT_DTYPE.set(dtype.type)
    try:
        yield
    finally:
        _DEFAULT_DTYPE.reset(token)


class Tensor:
    """Dense row-major array of finite floats, optionally recorded on a tape."""

    __slots__ = ("_data", "tape", "tape_id", "name")

    def __init__(
        self,
        data,
        *,
        tape: Optional["Tape"] = None,
        tape_id: Optional[int] = None,
        name: Optional[str] = None,
    ) -> None:
        arr = np.array(data, dtype=default_dtype())
        if not np.isfinite(arr).all():
            label = f" '{name}'" if name else ""
            raise NumericalError(f"Non-finite value in tensor{label} of shape {arr.shape}")
        arr.setflags(write=False)
        self._data = arr
        self.tape = tape
        self.tape_id = tape_id
        self.name = name

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return int(self._data.size)

    @property
    def recorded(self) -> bool:
        return self.tape is not None

    def item(self) -> float:
        if self._data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self._data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Writable copy of the payload."""
        return np.array(self._data)

    def detach(self) -> "Tensor":
        return Tensor(self._data, name=self.name)

    def __repr__(self) -> str:
        where = f", tape_id={self.tape_id}" if self.recorded else ""
        return f"Tensor(shape={self.shape}{where})"

    # Operator sugar; the functional forms live in src.autodiff.functions.
    def __add__(self, other: "Tensor") -> "Tensor":
        from src.autodiff import functions as F
        return F.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from src.autodiff import functions as F
        return F.sub(self, other)

    def __mul__(self, other) -> "Tensor":
        from src.autodiff import functions as F
        if isinstance(other, Tensor):
            return F.mul(self, other)
        return F.scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from src.autodiff import functions as F
        return F.scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from src.autodiff import functions as F
        return F.matmul(self, other)


@dataclass
class Node:
    """One recorded operation: its kind, parent ids and backward closure."""

    tape_id: int
    kind: str
    parents: Tuple[Optional[int], ...]
    shape: Tuple[int, ...]
    backward: Optional[BackwardFn] = None


class GradientTable:
    """Gradients produced by one backward pass, keyed by tape id."""

    def __init__(self, tape: "Tape", grads: Dict[int, np.ndarray]) -> None:
        self._tape = tape
        self._grads = grads

    def of(self, tensor: Tensor) -> np.ndarray:
        """Gradient for ``tensor``; zeros when it is unreachable from the root."""
        if tensor.tape is not self._tape:
            return np.zeros(tensor.shape, dtype=tensor.data.dtype)
        grad = self._grads.get(tensor.tape_id)
        if grad is None:
            return np.zeros(tensor.shape, dtype=tensor.data.dtype)
        return grad

    def __contains__(self, tape_id: int) -> bool:
        return tape_id in self._grads

    def __len__(self) -> int:
        return len(self._grads)


@dataclass
class Tape:
    """Ordered record of operations for one differentiation pass."""

    nodes: List[Node] = field(default_factory=list)
    uid: int = field(default_factory=lambda: next(_TAPE_IDS))

    def watch(self, value, name: Optional[str] = None) -> Tensor:
        """Record a leaf (a parameter or input we want gradients for)."""
        data = value.data if isinstance(value, Tensor) else value
        tape_id = len(self.nodes)
        tensor = Tensor(data, tape=self, tape_id=tape_id, name=name)
        self.nodes.append(Node(tape_id, "leaf", (), tensor.shape))
        return tensor

    def record(
        self,
        kind: str,
        value: np.ndarray,
        parents: Sequence[Optional[Tensor]],
        backward: BackwardFn,
    ) -> Tensor:
        """
        Append an operation node.

        Args:
            kind: Operation name, kept for diagnostics
            value: Forward result
            parents: Input tensors in the order ``backward`` returns gradients
            backward: Maps the output gradient to one gradient per parent

        Returns:
            The recorded result tensor
        """
        parent_ids: List[Optional[int]] = []
        for parent in parents:
            if parent is not None and parent.tape is not None and parent.tape is not self:
                raise ShapeError(f"Operation '{kind}' mixes tensors from different tapes")
            parent_ids.append(parent.tape_id if parent is not None and parent.tape is self else None)
        tape_id = len(self.nodes)
        try:
            tensor = Tensor(value, tape=self, tape_id=tape_id)
        except NumericalError as err:
            raise NumericalError(f"Operation '{kind}' produced a non-finite value") from err
        self.nodes.append(Node(tape_id, kind, tuple(parent_ids), tensor.shape, backward))
        return tensor

    def backward(self, root: Tensor) -> GradientTable:
        """
        Reverse accumulation from a scalar root.

        Raises:
            ShapeError: If the root is not a single-element tensor recorded here
        """
        if root.tape is not self:
            raise ShapeError("backward root must be recorded on this tape")
        if root.size != 1:
            raise ShapeError(f"backward root must be a scalar, got shape {root.shape}")

        grads: Dict[int, np.ndarray] = {root.tape_id: np.ones(root.shape, dtype=root.data.dtype)}
        for node in reversed(self.nodes[: root.tape_id + 1]):
            grad = grads.get(node.tape_id)
            if grad is None or node.backward is None:
                continue
            parent_grads = node.backward(grad)
            for parent_id, parent_grad in zip(node.parents, parent_grads):
                if parent_id is None or parent_grad is None:
                    continue
                expected = self.nodes[parent_id].shape
                if parent_grad.shape != expected:
                    raise ShapeError(
                        f"Backward of '{node.kind}' produced gradient {parent_grad.shape} "
                        f"for parent of shape {expected}"
                    )
                if parent_id in grads:
                    grads[parent_id] = grads[parent_id] + parent_grad
                else:
                    grads[parent_id] = parent_grad
        return GradientTable(self, grads)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)
