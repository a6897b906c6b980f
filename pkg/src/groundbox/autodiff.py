"""Minimal reverse-mode autodiff over numpy arrays.

Every kernel below works on float64 arrays and, when any input tracks
gradients, records itself so that :func:`backward` can replay the chain
rule in reverse. The recorded operation list is always in execution
order, which is topological by construction (inputs exist before their
consumers run).

Scalars are shape-() arrays; vectors are 1-D; matrices are 2-D. That is
all this artifact needs: samples are processed one at a time.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class OpRecord:
    """One executed differentiable operation.

    ``backward_fn(out_grad)`` returns one gradient array per input (or
    None for inputs that need no gradient).
    """

    __slots__ = ("name", "inputs", "output", "backward_fn")

    def __init__(self, name: str, inputs: tuple["Tensor", ...],
                 output: "Tensor", backward_fn: Callable):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tensor:
    """A shaped float64 array with an optional gradient slot.

    ``grad`` is allocated lazily and only for tensors with
    ``track_grad=True``; it accumulates additively until cleared.
    """

    __slots__ = ("data", "grad", "track_grad", "op")

    def __init__(self, data, track_grad: bool = False, op: OpRecord | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.track_grad = track_grad
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)  # own the buffer
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, track_grad={self.track_grad})"


def tensor(data, track_grad: bool = False) -> Tensor:
    return Tensor(data, track_grad=track_grad)


def constant(data) -> Tensor:
    return Tensor(data, track_grad=False)


def _shape_err(kernel: str, *shapes) -> ValueError:
    described = " vs ".join(str(tuple(s)) for s in shapes)
    return ValueError(f"{kernel}: incompatible shapes {described}")


def _make(kernel: str, data: np.ndarray, inputs: tuple[Tensor, ...],
          backward_fn: Callable) -> Tensor:
    """Build the output tensor, recording the op if any input is tracked."""
    tracked = any(t.track_grad for t in inputs)
    out = Tensor(data, track_grad=tracked)
    if tracked:
        out.op = OpRecord(kernel, inputs, out, backward_fn)
    return out


# ---------------------------------------------------------------------------
# kernels


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product with numpy 1-D/2-D semantics.

    (m,n)@(n,p)->(m,p); (n,)@(n,p)->(p,); (m,n)@(n,)->(m,); (n,)@(n,)->().
    """
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise _shape_err("matmul", ad.shape, bd.shape)
    if ad.shape[-1] != (bd.shape[0] if bd.ndim >= 1 else -1):
        raise _shape_err("matmul", ad.shape, bd.shape)
    data = ad @ bd

    def backward_fn(g: np.ndarray):
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T, ad.T @ g
        if ad.ndim == 1 and bd.ndim == 2:
            return bd @ g, ad[:, None] * g[None, :]
        if ad.ndim == 2 and bd.ndim == 1:
            return g[:, None] * bd[None, :], ad.T @ g
        return g * bd, g * ad

    return _make("matmul", data, (a, b), backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; also accepts (m,n)+(n,) for row-broadcast bias."""
    ad, bd = a.data, b.data
    broadcast = ad.ndim == 2 and bd.ndim == 1 and ad.shape[1] == bd.shape[0]
    if not broadcast and ad.shape != bd.shape:
        raise _shape_err("add", ad.shape, bd.shape)

    def backward_fn(g: np.ndarray):
        return g, (g.sum(axis=0) if broadcast else g)

    return _make("add", ad + bd, (a, b), backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise _shape_err("sub", a.data.shape, b.data.shape)
    return _make("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise _shape_err("mul", a.data.shape, b.data.shape)
    ad, bd = a.data, b.data
    return _make("mul", ad * bd, (a, b), lambda g: (g * bd, g * ad))


def addc(a: Tensor, c: float) -> Tensor:
    """Add a python-scalar constant."""
    return _make("addc", a.data + c, (a,), lambda g: (g,))


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python-scalar constant."""
    return _make("scale", a.data * c, (a,), lambda g: (g * c,))


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate 1-D tensors."""
    if not parts:
        raise ValueError("concat: empty input list")
    for p in parts:
        if p.data.ndim != 1:
            raise _shape_err("concat", p.data.shape)
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g: np.ndarray):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _make("concat", np.concatenate([p.data for p in parts]),
                 tuple(parts), backward_fn)


def relu(a: Tensor) -> Tensor:
    ad = a.data
    return _make("relu", np.maximum(ad, 0.0), (a,),
                 lambda g: (g * (ad > 0.0),))


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _make("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def log(a: Tensor) -> Tensor:
    """Natural log. Inputs must be strictly positive; callers add their
    own floor epsilon first."""
    ad = a.data
    if np.any(ad <= 0.0):
        raise ValueError(f"log: non-positive input (min {ad.min()})")
    return _make("log", np.log(ad), (a,), lambda g: (g / ad,))


def softmax(a: Tensor) -> Tensor:
    """Softmax over a 1-D vector (max-shifted for stability)."""
    if a.data.ndim != 1:
        raise _shape_err("softmax", a.data.shape)
    shifted = a.data - a.data.max()
    e = np.exp(shifted)
    out = e / e.sum()

    def backward_fn(g: np.ndarray):
        return (out * (g - np.dot(g, out)),)

    return _make("softmax", out, (a,), backward_fn)


def l2_normalize(a: Tensor) -> Tensor:
    """Scale a 1-D vector to unit Euclidean norm; the zero vector passes
    through unchanged (with zero gradient)."""
    if a.data.ndim != 1:
        raise _shape_err("l2_normalize", a.data.shape)
    norm = float(np.linalg.norm(a.data))
    if norm == 0.0:
        return _make("l2_normalize", a.data.copy(), (a,),
                     lambda g: (np.zeros_like(g),))
    out = a.data / norm

    def backward_fn(g: np.ndarray):
        return ((g - out * np.dot(out, g)) / norm,)

    return _make("l2_normalize", out, (a,), backward_fn)


def vsum(a: Tensor) -> Tensor:
    """Sum all entries to a scalar."""
    ad = a.data
    return _make("vsum", np.asarray(ad.sum()), (a,),
                 lambda g: (np.full_like(ad, float(g)),))


def mean(a: Tensor) -> Tensor:
    ad = a.data
    return _make("mean", np.asarray(ad.mean()), (a,),
                 lambda g: (np.full_like(ad, float(g) / ad.size),))


def smooth_l1(a: Tensor) -> Tensor:
    """Elementwise robust penalty: 0.5*x^2 for |x|<1, |x|-0.5 otherwise.

    C1 everywhere; the derivative is clip(x, -1, 1).
    """
    ad = a.data
    absx = np.abs(ad)
    out = np.where(absx < 1.0, 0.5 * ad * ad, absx - 0.5)
    return _make("smooth_l1", out, (a,), lambda g: (g * np.clip(ad, -1.0, 1.0),))


def take_row(table: Tensor, index: int) -> Tensor:
    """Select one row of a 2-D table (embedding lookup)."""
    td = table.data
    if td.ndim != 2:
        raise _shape_err("take_row", td.shape)
    if not 0 <= index < td.shape[0]:
        raise ValueError(f"take_row: index {index} out of range [0, {td.shape[0]})")

    def backward_fn(g: np.ndarray):
        # Scatter straight into the table's gradient; a dense zero table
        # per lookup would dominate the backward pass.
        if table.track_grad:
            if table.grad is None:
                table.grad = np.zeros_like(td)
            table.grad[index] += g
        return (None,)

    return _make("take_row", td[index].copy(), (table,), backward_fn)


# ---------------------------------------------------------------------------
# backward


def _ordered_ops(loss: Tensor) -> list[OpRecord]:
    """Topologically ordered list of ops reachable from ``loss``.

    Depth-first postorder over the recorded graph; every op appears
    exactly once and after all producers of its inputs.
    """
    if loss.op is None:
        return []
    ops: list[OpRecord] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            ops.append(node.op)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for inp in node.op.inputs:
            if inp.op is not None:  # leaves need no expansion
                stack.append((inp, False))
    return ops


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tracked tensor reachable from ``loss``.

    Gradients accumulate additively, both across multiple uses of a
    tensor inside one graph and across repeated backward calls (callers
    clear grads between optimization steps).
    """
    if loss.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.track_grad:
        raise ValueError("backward: loss does not track gradients")
    loss.accumulate_grad(np.ones_like(loss.data))
    for op in reversed(_ordered_ops(loss)):
        out_grad = op.output.grad
        if out_grad is None:
            continue
        grads = op.backward_fn(out_grad)
        for inp, g in zip(op.inputs, grads):
            if g is not None and inp.track_grad:
                inp.accumulate_grad(g)
