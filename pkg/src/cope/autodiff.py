"""Tape-based reverse-mode differentiation over the ops the models use.

Graphs are built by running ordinary forward code on :class:`Var` handles;
the same forward code runs on plain ndarrays, which is what the finite
difference checker and the brute-force oracles rely on. Gradient
accumulation walks node ids in reverse, so the order is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np


@dataclass
class Node:
    op: str
    value: np.ndarray
    inputs: tuple[int, ...]
    ctx: Any = None


class Tape:
    def __init__(self):
        self.nodes: list[Node] = []
        self._params: dict[str, int] = {}

    def _push(self, op, value, inputs=(), ctx=None) -> "Var":
        self.nodes.append(
            Node(op, np.asarray(value, dtype=np.float64), tuple(inputs), ctx)
        )
        return Var(self, len(self.nodes) - 1)

    def param(self, name: str, value) -> "Var":
        """Register a named trainable leaf; names must be unique per tape."""
        if name in self._params:
            raise ValueError(f"parameter '{name}' already registered on this tape")
        v = self._push("leaf", value)
        self._params[name] = v.nid
        return v

    def constant(self, value) -> "Var":
        return self._push("leaf", value)


class Var:
    """Handle to one tape node; supports the operators the models need."""

    __slots__ = ("tape", "nid")

    # Forces ndarray <op> Var to defer to the reflected methods below.
    __array_ufunc__ = None

    def __init__(self, tape: Tape, nid: int):
        self.tape = tape
        self.nid = nid

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.nid].value

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def _binary(self, other, op, op_const, fn):
        if isinstance(other, Var):
            if other.tape is not self.tape:
                raise ValueError("operands live on different tapes")
            return self.tape._push(
                op, fn(self.value, other.value), (self.nid, other.nid)
            )
        c = np.asarray(other, dtype=np.float64)
        return self.tape._push(op_const, fn(self.value, c), (self.nid,), ctx=c)

    def __add__(self, other):
        return self._binary(other, "add", "add_const", np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, "sub", "sub_const", np.subtract)

    def __rsub__(self, other):
        c = np.asarray(other, dtype=np.float64)
        return self.tape._push("rsub_const", c - self.value, (self.nid,), ctx=c)

    def __mul__(self, other):
        return self._binary(other, "mul", "mul_const", np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by a Var is not on the tape; multiply instead")
        return self * (1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        return self.tape._push("neg", -self.value, (self.nid,))

    def __matmul__(self, other):
        if not isinstance(other, Var):
            other = self.tape.constant(other)
        if self.ndim != 2 or other.ndim != 2:
            raise ValueError(
                f"matmul expects matrices, got {self.shape} @ {other.shape}"
            )
        return self.tape._push(
            "matmul", self.value @ other.value, (self.nid, other.nid)
        )

    def __rmatmul__(self, other):
        return self.tape.constant(other).__matmul__(self)

    @property
    def T(self):
        if self.ndim != 2:
            raise ValueError(f"transpose expects a matrix, got shape {self.shape}")
        return self.tape._push("transpose", self.value.T, (self.nid,))

    def tanh(self):
        return self.tape._push("tanh", np.tanh(self.value), (self.nid,))

    def exp(self):
        return self.tape._push("exp", np.exp(self.value), (self.nid,))

    def softplus(self):
        return self.tape._push(
            "softplus", np.logaddexp(0.0, self.value), (self.nid,)
        )

    def sum(self, axis=None, keepdims=False):
        if axis is not None and not isinstance(axis, tuple):
            axis = (axis,)
        return self.tape._push(
            "sum",
            np.sum(self.value, axis=axis, keepdims=keepdims),
            (self.nid,),
            ctx=(axis, keepdims, self.value.shape),
        )

    def mean(self):
        return self.sum() * (1.0 / self.value.size)

    def reshape(self, shape):
        return self.tape._push(
            "reshape",
            np.reshape(self.value, shape),
            (self.nid,),
            ctx=self.value.shape,
        )


def tanh(x):
    return x.tanh() if isinstance(x, Var) else np.tanh(x)


def exp(x):
    return x.exp() if isinstance(x, Var) else np.exp(x)


def softplus(x):
    return x.softplus() if isinstance(x, Var) else np.logaddexp(0.0, x)


def concat_rows(parts):
    """Stack matrices along rows; differentiable when any part is a Var."""
    parts = list(parts)
    if not any(isinstance(p, Var) for p in parts):
        return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts], axis=0)
    tape = next(p.tape for p in parts if isinstance(p, Var))
    vars_ = [p if isinstance(p, Var) else tape.constant(p) for p in parts]
    cols = {v.shape[1] for v in vars_}
    if any(v.ndim != 2 for v in vars_) or len(cols) != 1:
        raise ValueError(
            "concat_rows expects matrices with equal column counts, got "
            + str([v.shape for v in vars_])
        )
    rows = [v.shape[0] for v in vars_]
    return tape._push(
        "concat_rows",
        np.concatenate([v.value for v in vars_], axis=0),
        tuple(v.nid for v in vars_),
        ctx=rows,
    )


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _sum_backward(node, g, nodes):
    axis, keepdims, in_shape = node.ctx
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g, in_shape),)


def _concat_backward(node, g, nodes):
    offsets = np.cumsum([0] + node.ctx)
    return tuple(g[offsets[i] : offsets[i + 1]] for i in range(len(node.ctx)))


_RULES: dict[str, Callable] = {
    "add": lambda n, g, v: (
        _unbroadcast(g, v[n.inputs[0]].value.shape),
        _unbroadcast(g, v[n.inputs[1]].value.shape),
    ),
    "add_const": lambda n, g, v: (_unbroadcast(g, v[n.inputs[0]].value.shape),),
    "sub": lambda n, g, v: (
        _unbroadcast(g, v[n.inputs[0]].value.shape),
        _unbroadcast(-g, v[n.inputs[1]].value.shape),
    ),
    "sub_const": lambda n, g, v: (_unbroadcast(g, v[n.inputs[0]].value.shape),),
    "rsub_const": lambda n, g, v: (_unbroadcast(-g, v[n.inputs[0]].value.shape),),
    "mul": lambda n, g, v: (
        _unbroadcast(g * v[n.inputs[1]].value, v[n.inputs[0]].value.shape),
        _unbroadcast(g * v[n.inputs[0]].value, v[n.inputs[1]].value.shape),
    ),
    "mul_const": lambda n, g, v: (
        _unbroadcast(g * n.ctx, v[n.inputs[0]].value.shape),
    ),
    "neg": lambda n, g, v: (-g,),
    "matmul": lambda n, g, v: (
        g @ v[n.inputs[1]].value.T,
        v[n.inputs[0]].value.T @ g,
    ),
    "transpose": lambda n, g, v: (g.T,),
    "tanh": lambda n, g, v: (g * (1.0 - n.value**2),),
    "exp": lambda n, g, v: (g * n.value,),
    "softplus": lambda n, g, v: (
        g / (1.0 + np.exp(-v[n.inputs[0]].value)),
    ),
    "sum": _sum_backward,
    "reshape": lambda n, g, v: (np.reshape(g, n.ctx),),
    "concat_rows": _concat_backward,
}


def backward(tape: Tape, out: Var, seed=None) -> dict[str, np.ndarray]:
    """Accumulate d(seed . out)/d(param) for every registered parameter.

    Parameters the output does not depend on get zero gradients. Nodes whose
    op has no registered rule raise, naming the op.
    """
    nodes = tape.nodes
    out_val = nodes[out.nid].value
    seed = np.ones_like(out_val) if seed is None else np.asarray(seed, np.float64)
    if seed.shape != out_val.shape:
        raise ValueError(
            f"seed shape {seed.shape} does not match output shape {out_val.shape}"
        )
    grads: list[np.ndarray | None] = [None] * (out.nid + 1)
    grads[out.nid] = seed
    for nid in range(out.nid, -1, -1):
        g = grads[nid]
        if g is None:
            continue
        node = nodes[nid]
        if node.op == "leaf":
            continue
        rule = _RULES.get(node.op)
        if rule is None:
            raise ValueError(f"no backward rule registered for op '{node.op}'")
        for inp, contrib in zip(node.inputs, rule(node, g, nodes)):
            if grads[inp] is None:
                grads[inp] = np.zeros_like(nodes[inp].value)
            grads[inp] = grads[inp] + contrib
    result = {}
    for name, nid in tape._params.items():
        if nid <= out.nid and grads[nid] is not None:
            result[name] = grads[nid]
        else:
            result[name] = np.zeros_like(nodes[nid].value)
    return result


def finite_diff_check(f, params: dict, h: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    `f` must accept a dict of parameter arrays or of Vars and return a
    scalar of matching kind. The relative error denominator is
    max(|analytic|, |fd|, 1e-8) per coordinate.
    """
    params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    tape = Tape()
    out = f({k: tape.param(k, v) for k, v in params.items()})
    if not isinstance(out, Var) or out.value.size != 1:
        raise ValueError("finite_diff_check needs a scalar-valued graph output")
    analytic = backward(tape, out, np.ones_like(out.value))

    def eval_at(work, label):
        val = np.asarray(f(work), dtype=np.float64)
        if val.size != 1 or not np.isfinite(val).all():
            raise ValueError(f"non-finite or non-scalar value while perturbing {label}")
        return float(val.reshape(()))

    work = {k: v.copy() for k, v in params.items()}
    max_rel = 0.0
    for name, arr in work.items():
        flat = arr.reshape(-1)
        a_flat = np.asarray(analytic[name]).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = eval_at(work, f"{name}[{i}]")
            flat[i] = orig - h
            fm = eval_at(work, f"{name}[{i}]")
            flat[i] = orig
            fd = (fp - fm) / (2.0 * h)
            rel = abs(a_flat[i] - fd) / max(abs(a_flat[i]), abs(fd), 1e-8)
            max_rel = max(max_rel, rel)
    return max_rel
