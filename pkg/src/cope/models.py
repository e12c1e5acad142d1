"""Coupled low-rank polynomial generators and their ablation baselines.

Every forward runs on column batches (features x batch) and is written
against the operator set shared by ndarrays and autodiff Vars, so the same
code is evaluated by the brute-force oracles and differentiated during
training. Public entry points also accept plain 1-D vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tape, Var, concat_rows, tanh

_BLOCK_KINDS = ("ccp", "ncp", "additive")


def _shape(x):
    return tuple(x.shape)


def _check_factor_grid(input_maps, who):
    if not input_maps or not input_maps[0]:
        raise ValueError(f"{who} needs at least one order and one variable")
    n_vars = len(input_maps[0])
    ranks = set()
    for n, row in enumerate(input_maps):
        if len(row) != n_vars:
            raise ValueError(
                f"{who} order {n + 1} has {len(row)} factor(s), expected {n_vars}"
            )
        for phi, m in enumerate(row):
            if m.ndim != 2:
                raise ValueError(f"{who} factor ({n + 1},{phi}) is not a matrix")
            if m.shape[0] != input_maps[0][phi].shape[0]:
                raise ValueError(
                    f"{who} factor ({n + 1},{phi}) has {m.shape[0]} rows, "
                    f"expected {input_maps[0][phi].shape[0]}"
                )
            ranks.add(m.shape[1])
    if len(ranks) != 1:
        raise ValueError(f"{who} factors disagree on rank: {sorted(ranks)}")
    return n_vars, ranks.pop()


def _check_head(head, head_bias, rank, who):
    if head.ndim != 2 or head.shape[1] != rank:
        raise ValueError(
            f"{who} head must be (out_dim, {rank}), got {_shape(head)}"
        )
    if _shape(head_bias) != (head.shape[0],):
        raise ValueError(
            f"{who} head bias shape {_shape(head_bias)} does not match "
            f"out_dim {head.shape[0]}"
        )


@dataclass
class CcpParams:
    """Multiplicative-skip recursion: y_n = y_{n-1} + (sum_phi U_n,phi^T z_phi) * y_{n-1}."""

    input_maps: list[list]  # [order][variable] -> (d_phi, rank)
    head: object  # (out_dim, rank)
    head_bias: object  # (out_dim,)
    share_conditional: bool = False

    def __post_init__(self):
        n_vars, rank = _check_factor_grid(self.input_maps, "CcpParams")
        _check_head(self.head, self.head_bias, rank, "CcpParams")
        if self.share_conditional:
            if n_vars < 2:
                raise ValueError("share_conditional needs a second variable")
            for n in range(1, len(self.input_maps)):
                if self.input_maps[n][1] is not self.input_maps[0][1]:
                    raise ValueError(
                        "share_conditional requires the order-1 conditional "
                        f"factor to be aliased at order {n + 1}"
                    )

    @property
    def order(self):
        return len(self.input_maps)

    @property
    def n_variables(self):
        return len(self.input_maps[0])

    @property
    def rank(self):
        return self.head.shape[1]

    @property
    def out_dim(self):
        return self.head.shape[0]

    @property
    def input_dims(self):
        return tuple(m.shape[0] for m in self.input_maps[0])


@dataclass
class NcpParams:
    """Gated recursion: y_n = (sum_phi A_n,phi^T z_phi) * (V_n^T y_{n-1} + B_n^T b_n)."""

    input_maps: list[list]  # [order][variable] -> (d_phi, rank)
    state_maps: list  # orders 2..N -> (rank, rank)
    offset_maps: list  # [order] -> (offset_dim, rank)
    offset_seeds: list  # [order] -> (offset_dim,)
    head: object
    head_bias: object
    share_conditional: bool = False

    def __post_init__(self):
        n_vars, rank = _check_factor_grid(self.input_maps, "NcpParams")
        _check_head(self.head, self.head_bias, rank, "NcpParams")
        order = len(self.input_maps)
        if len(self.state_maps) != order - 1:
            raise ValueError(
                f"NcpParams needs {order - 1} state map(s), got {len(self.state_maps)}"
            )
        for i, v in enumerate(self.state_maps):
            if _shape(v) != (rank, rank):
                raise ValueError(
                    f"state map {i + 2} has shape {_shape(v)}, expected ({rank}, {rank})"
                )
        if len(self.offset_maps) != order or len(self.offset_seeds) != order:
            raise ValueError("NcpParams needs one offset map and seed per order")
        width = self.offset_seeds[0].shape[0]
        for i, (bm, bs) in enumerate(zip(self.offset_maps, self.offset_seeds)):
            if _shape(bm) != (width, rank) or _shape(bs) != (width,):
                raise ValueError(
                    f"offset pair {i + 1} has shapes {_shape(bm)}/{_shape(bs)}, "
                    f"expected ({width}, {rank})/({width},)"
                )
        if self.share_conditional:
            if n_vars < 2:
                raise ValueError("share_conditional needs a second variable")
            for n in range(1, order):
                if self.input_maps[n][1] is not self.input_maps[0][1]:
                    raise ValueError(
                        "share_conditional requires the order-1 conditional "
                        f"factor to be aliased at order {n + 1}"
                    )

    order = CcpParams.order
    n_variables = CcpParams.n_variables
    rank = CcpParams.rank
    out_dim = CcpParams.out_dim
    input_dims = CcpParams.input_dims


@dataclass
class PiNetParams:
    """Single-input skip recursion: y_n = (L_n^T z) * y_{n-1} + y_{n-1}."""

    input_maps: list  # [order] -> (in_dim, rank)
    head: object
    head_bias: object

    def __post_init__(self):
        _, rank = _check_factor_grid([[m] for m in self.input_maps], "PiNetParams")
        _check_head(self.head, self.head_bias, rank, "PiNetParams")

    @property
    def order(self):
        return len(self.input_maps)

    @property
    def rank(self):
        return self.head.shape[1]

    @property
    def out_dim(self):
        return self.head.shape[0]

    @property
    def in_dim(self):
        return self.input_maps[0].shape[0]


def _prep_inputs(inputs, dims, who):
    """Validate arity/shapes; return column batches plus a squeeze flag."""
    inputs = list(inputs)
    if len(inputs) != len(dims):
        raise ValueError(f"{who} expects {len(dims)} input(s), got {len(inputs)}")
    if any(isinstance(z, Var) for z in inputs):
        cols, squeeze = list(inputs), False
    else:
        arrays = [np.asarray(z, dtype=np.float64) for z in inputs]
        ndims = {a.ndim for a in arrays}
        if ndims == {1}:
            cols, squeeze = [a[:, None] for a in arrays], True
        elif ndims == {2}:
            cols, squeeze = arrays, False
        else:
            raise ValueError(f"{who} got a mix of vectors and batches")
    for i, (z, d) in enumerate(zip(cols, dims)):
        if z.ndim != 2 or z.shape[0] != d:
            raise ValueError(
                f"{who} input {i} has shape {_shape(z)}, expected ({d}, batch)"
            )
        if z.shape[1] != cols[0].shape[1]:
            raise ValueError(f"{who} inputs disagree on batch size")
    return cols, squeeze


def _col(vec):
    return vec.reshape((vec.shape[0], 1))


def _linear_mix(maps, inputs):
    acc = maps[0].T @ inputs[0]
    for m, z in zip(maps[1:], inputs[1:]):
        acc = acc + m.T @ z
    return acc


def ccp_forward_cols(p: CcpParams, inputs):
    y = _linear_mix(p.input_maps[0], inputs)
    for n in range(1, p.order):
        y = y + _linear_mix(p.input_maps[n], inputs) * y
    return p.head @ y + _col(p.head_bias)


def ncp_forward_cols(p: NcpParams, inputs):
    y = _linear_mix(p.input_maps[0], inputs) * (
        p.offset_maps[0].T @ _col(p.offset_seeds[0])
    )
    for n in range(1, p.order):
        y = _linear_mix(p.input_maps[n], inputs) * (
            p.state_maps[n - 1].T @ y + p.offset_maps[n].T @ _col(p.offset_seeds[n])
        )
    return p.head @ y + _col(p.head_bias)


def additive_forward_cols(p: NcpParams, inputs):
    """Ablation of the gated recursion with every Hadamard replaced by addition."""
    y = _linear_mix(p.input_maps[0], inputs) + (
        p.offset_maps[0].T @ _col(p.offset_seeds[0])
    )
    for n in range(1, p.order):
        y = _linear_mix(p.input_maps[n], inputs) + (
            p.state_maps[n - 1].T @ y + p.offset_maps[n].T @ _col(p.offset_seeds[n])
        )
    return p.head @ y + _col(p.head_bias)


def pinet_forward_cols(p: PiNetParams, z):
    y = p.input_maps[0].T @ z
    for n in range(1, p.order):
        y = (p.input_maps[n].T @ z) * y + y
    return p.head @ y + _col(p.head_bias)


def spade_forward_cols(p: NcpParams, z_noise, z_cond):
    """Conditioning-by-gating recursion: the first layer consumes the noise
    alone and has no offset factor; later layers gate with the conditional
    input only."""
    y = p.input_maps[0][0].T @ z_noise
    for n in range(1, p.order):
        y = (p.input_maps[n][1].T @ z_cond) * (
            p.state_maps[n - 1].T @ y + p.offset_maps[n].T @ _col(p.offset_seeds[n])
        )
    return p.head @ y + _col(p.head_bias)


def _vector_entry(forward_cols, p, inputs, who):
    cols, squeeze = _prep_inputs(inputs, p.input_dims, who)
    out = forward_cols(p, cols)
    return out[:, 0] if squeeze else out


def ccp_forward(p: CcpParams, inputs):
    return _vector_entry(ccp_forward_cols, p, inputs, "ccp_forward")


def ncp_forward(p: NcpParams, inputs):
    return _vector_entry(ncp_forward_cols, p, inputs, "ncp_forward")


def additive_forward(p: NcpParams, inputs):
    return _vector_entry(additive_forward_cols, p, inputs, "additive_forward")


def pinet_forward(p: PiNetParams, z):
    cols, squeeze = _prep_inputs([z], (p.in_dim,), "pinet_forward")
    out = pinet_forward_cols(p, cols[0])
    return out[:, 0] if squeeze else out


def spade_forward(p: NcpParams, z_noise, z_cond):
    cols, squeeze = _prep_inputs([z_noise, z_cond], p.input_dims, "spade_forward")
    out = spade_forward_cols(p, cols[0], cols[1])
    return out[:, 0] if squeeze else out


def concat_linear_forward(weights, inputs):
    """Affine baseline: stack the inputs and apply one linear map."""
    total = weights.shape[0]
    if any(isinstance(z, Var) for z in inputs) or isinstance(weights, Var):
        stacked = concat_rows(list(inputs))
        if stacked.shape[0] != total:
            raise ValueError(
                f"concat_linear_forward weights expect {total} stacked rows, "
                f"got {stacked.shape[0]}"
            )
        return weights.T @ stacked
    arrays = [np.asarray(z, dtype=np.float64) for z in inputs]
    squeeze = all(a.ndim == 1 for a in arrays)
    if squeeze:
        arrays = [a[:, None] for a in arrays]
    stacked = np.concatenate(arrays, axis=0)
    if stacked.shape[0] != total:
        raise ValueError(
            f"concat_linear_forward weights expect {total} stacked rows, "
            f"got {stacked.shape[0]}"
        )
    out = weights.T @ stacked
    return out[:, 0] if squeeze else out


_BLOCK_FORWARDS = {
    "ccp": ccp_forward_cols,
    "ncp": ncp_forward_cols,
    "additive": additive_forward_cols,
}


@dataclass
class ChainBlock:
    kind: str
    params: object
    consume_prev: bool
    consume_vars: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in _BLOCK_KINDS:
            raise ValueError(f"unknown block kind '{self.kind}'")
        want = CcpParams if self.kind == "ccp" else NcpParams
        if not isinstance(self.params, want):
            raise ValueError(
                f"block kind '{self.kind}' needs {want.__name__} parameters"
            )
        self.consume_vars = tuple(int(j) for j in self.consume_vars)


@dataclass
class ModelSpec:
    """Chain of polynomial blocks; degrees multiply along the chain."""

    var_dims: tuple[int, ...]
    blocks: list[ChainBlock]
    output_activation: str = "none"
    centering: str = "none"

    def __post_init__(self):
        self.var_dims = tuple(int(d) for d in self.var_dims)
        if not self.blocks:
            raise ValueError("ModelSpec needs at least one block")
        if self.output_activation not in ("none", "tanh"):
            raise ValueError(f"unknown output_activation '{self.output_activation}'")
        if self.centering not in ("none", "batch_mean"):
            raise ValueError(f"unknown centering '{self.centering}'")
        if self.blocks[0].consume_prev:
            raise ValueError("block 0 has no predecessor to consume")
        prev_out = None
        for i, blk in enumerate(self.blocks):
            if i > 0 and not blk.consume_prev and not blk.consume_vars:
                raise ValueError(f"block {i} consumes nothing")
            for j in blk.consume_vars:
                if not 0 <= j < len(self.var_dims):
                    raise ValueError(f"block {i} consumes unknown variable {j}")
            expect = ([prev_out] if blk.consume_prev else []) + [
                self.var_dims[j] for j in blk.consume_vars
            ]
            got = tuple(blk.params.input_dims)
            if got != tuple(expect):
                raise ValueError(
                    f"block {i} input dims {got} do not match chain dims {tuple(expect)}"
                )
            prev_out = blk.params.out_dim

    @property
    def out_dim(self):
        return self.blocks[-1].params.out_dim


def product_compose(spec: ModelSpec, inputs):
    """Run the block chain; optional batch-mean centering between blocks.

    Centering subtracts the per-feature mean across the batch axis, so a
    batch of one collapses to zeros; it is meant for training batches.
    """
    cols, squeeze = _prep_inputs(inputs, spec.var_dims, "product_compose")
    x = None
    last = len(spec.blocks) - 1
    for i, blk in enumerate(spec.blocks):
        ins = ([x] if blk.consume_prev else []) + [cols[j] for j in blk.consume_vars]
        x = _BLOCK_FORWARDS[blk.kind](blk.params, ins)
        if spec.centering == "batch_mean" and i < last:
            x = x - x.sum(axis=1, keepdims=True) * (1.0 / x.shape[1])
    if spec.output_activation == "tanh":
        x = tanh(x)
    return x[:, 0] if squeeze else x


def _uniform(rng, shape, scale):
    return rng.uniform(-scale, scale, size=shape)


def init_ccp(rng, input_dims, rank, out_dim, order, share_conditional=False, scale=None):
    scale = 1.0 / np.sqrt(rank) if scale is None else float(scale)
    input_maps = [
        [_uniform(rng, (d, rank), scale) for d in input_dims] for _ in range(order)
    ]
    if share_conditional:
        for n in range(1, order):
            input_maps[n][1] = input_maps[0][1]
    return CcpParams(
        input_maps=input_maps,
        head=_uniform(rng, (out_dim, rank), scale),
        head_bias=np.zeros(out_dim),
        share_conditional=share_conditional,
    )


def init_ncp(
    rng,
    input_dims,
    rank,
    out_dim,
    order,
    offset_dim=None,
    share_conditional=False,
    scale=None,
):
    scale = 1.0 / np.sqrt(rank) if scale is None else float(scale)
    width = rank if offset_dim is None else int(offset_dim)
    input_maps = [
        [_uniform(rng, (d, rank), scale) for d in input_dims] for _ in range(order)
    ]
    if share_conditional:
        for n in range(1, order):
            input_maps[n][1] = input_maps[0][1]
    return NcpParams(
        input_maps=input_maps,
        state_maps=[_uniform(rng, (rank, rank), scale) for _ in range(order - 1)],
        offset_maps=[_uniform(rng, (width, rank), scale) for _ in range(order)],
        offset_seeds=[np.ones(width) for _ in range(order)],
        head=_uniform(rng, (out_dim, rank), scale),
        head_bias=np.zeros(out_dim),
        share_conditional=share_conditional,
    )


def init_pinet(rng, in_dim, rank, out_dim, order, scale=None):
    scale = 1.0 / np.sqrt(rank) if scale is None else float(scale)
    return PiNetParams(
        input_maps=[_uniform(rng, (in_dim, rank), scale) for _ in range(order)],
        head=_uniform(rng, (out_dim, rank), scale),
        head_bias=np.zeros(out_dim),
    )


def init_concat_linear(rng, input_dims, out_dim, scale=None):
    total = int(sum(input_dims))
    scale = 1.0 / np.sqrt(total) if scale is None else float(scale)
    return _uniform(rng, (total, out_dim), scale)


def init_chain(
    rng,
    var_dims,
    block_orders,
    rank,
    hidden_dim,
    out_dim,
    kind="ccp",
    reconsume_conditional=True,
    share_conditional=False,
    output_activation="none",
    centering="none",
):
    """Standard chain: block 0 sees every variable, later blocks see the
    previous output plus (optionally) the conditional variables again."""
    var_dims = tuple(int(d) for d in var_dims)
    cond_vars = tuple(range(1, len(var_dims)))
    init = init_ccp if kind == "ccp" else init_ncp
    blocks = []
    prev = None
    for i, order in enumerate(block_orders):
        if i == 0:
            consume_prev, consume_vars = False, tuple(range(len(var_dims)))
        else:
            consume_prev = True
            consume_vars = cond_vars if reconsume_conditional else ()
        dims = ([prev] if consume_prev else []) + [var_dims[j] for j in consume_vars]
        width = out_dim if i == len(block_orders) - 1 else hidden_dim
        share = share_conditional and len(dims) >= 2
        blocks.append(
            ChainBlock(
                kind=kind,
                params=init(rng, dims, rank, width, order, share_conditional=share),
                consume_prev=consume_prev,
                consume_vars=consume_vars,
            )
        )
        prev = width
    return ModelSpec(
        var_dims=var_dims,
        blocks=blocks,
        output_activation=output_activation,
        centering=centering,
    )


def spade_config(p: NcpParams) -> NcpParams:
    """NCP parameters whose gated forward collapses to spade_forward(p).

    Zeroes the factors spade_forward never reads and pins the first offset
    pair so its product is the all-ones vector (first seed entry 1, first
    offset row 1), making the first-layer Hadamard an exact identity.
    """
    if p.n_variables != 2:
        raise ValueError("spade_config expects a two-variable model")
    input_maps = [[np.array(p.input_maps[0][0]), np.zeros_like(p.input_maps[0][1])]]
    for n in range(1, p.order):
        input_maps.append(
            [np.zeros_like(p.input_maps[n][0]), np.array(p.input_maps[n][1])]
        )
    offset_maps = [np.array(m) for m in p.offset_maps]
    offset_seeds = [np.array(s) for s in p.offset_seeds]
    offset_maps[0] = np.zeros_like(offset_maps[0])
    offset_maps[0][0, :] = 1.0
    offset_seeds[0] = np.zeros_like(offset_seeds[0])
    offset_seeds[0][0] = 1.0
    return NcpParams(
        input_maps=input_maps,
        state_maps=[np.array(v) for v in p.state_maps],
        offset_maps=offset_maps,
        offset_seeds=offset_seeds,
        head=np.array(p.head),
        head_bias=np.array(p.head_bias),
    )


def init_discriminator(rng, in_dim, hidden, scale=None):
    """Two-hidden-layer tanh scorer used by the adversarial demo."""
    s1 = (1.0 / np.sqrt(in_dim)) if scale is None else scale
    s2 = (1.0 / np.sqrt(hidden)) if scale is None else scale
    return {
        "w1": _uniform(rng, (hidden, in_dim), s1),
        "b1": np.zeros(hidden),
        "w2": _uniform(rng, (hidden, hidden), s2),
        "b2": np.zeros(hidden),
        "w3": _uniform(rng, (1, hidden), s2),
        "b3": np.zeros(1),
    }


def discriminator_forward(params, x):
    h = tanh(params["w1"] @ x + _col(params["b1"]))
    h = tanh(params["w2"] @ h + _col(params["b2"]))
    return params["w3"] @ h + _col(params["b3"])


def _rebuild(model, leaf, prefix="", memo=None):
    memo = {} if memo is None else memo

    def get(name, arr):
        key = id(arr)
        if key not in memo:
            memo[key] = leaf(name, arr)
        return memo[key]

    if isinstance(model, CcpParams):
        return CcpParams(
            input_maps=[
                [get(f"{prefix}in{n + 1}.v{phi}", m) for phi, m in enumerate(row)]
                for n, row in enumerate(model.input_maps)
            ],
            head=get(f"{prefix}head", model.head),
            head_bias=get(f"{prefix}head_bias", model.head_bias),
            share_conditional=model.share_conditional,
        )
    if isinstance(model, NcpParams):
        return NcpParams(
            input_maps=[
                [get(f"{prefix}in{n + 1}.v{phi}", m) for phi, m in enumerate(row)]
                for n, row in enumerate(model.input_maps)
            ],
            state_maps=[
                get(f"{prefix}state{n + 2}", v) for n, v in enumerate(model.state_maps)
            ],
            offset_maps=[
                get(f"{prefix}off{n + 1}", m) for n, m in enumerate(model.offset_maps)
            ],
            offset_seeds=[
                get(f"{prefix}seed{n + 1}", s)
                for n, s in enumerate(model.offset_seeds)
            ],
            head=get(f"{prefix}head", model.head),
            head_bias=get(f"{prefix}head_bias", model.head_bias),
            share_conditional=model.share_conditional,
        )
    if isinstance(model, PiNetParams):
        return PiNetParams(
            input_maps=[
                get(f"{prefix}in{n + 1}", m) for n, m in enumerate(model.input_maps)
            ],
            head=get(f"{prefix}head", model.head),
            head_bias=get(f"{prefix}head_bias", model.head_bias),
        )
    if isinstance(model, ModelSpec):
        return replace(
            model,
            blocks=[
                replace(blk, params=_rebuild(blk.params, leaf, f"{prefix}b{i}.", memo))
                for i, blk in enumerate(model.blocks)
            ],
        )
    if isinstance(model, dict):
        return {k: get(f"{prefix}{k}", v) for k, v in model.items()}
    raise TypeError(f"cannot walk parameters of {type(model).__name__}")


def model_parameters(model) -> dict:
    """Named parameter arrays in traversal order; aliased factors appear once."""
    out = {}

    def leaf(name, arr):
        out[name] = arr
        return arr

    _rebuild(model, leaf)
    return out


def lift_model(tape: Tape, model):
    """Copy of `model` whose leaves are tape Vars (aliasing preserved)."""
    return _rebuild(model, lambda name, arr: tape.param(name, arr))


def with_parameters(model, values: dict):
    """Copy of `model` with leaves replaced by `values[name]`."""
    return _rebuild(model, lambda name, arr: values[name])
