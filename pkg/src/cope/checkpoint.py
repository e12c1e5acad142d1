"""JSON model checkpoints: block structure plus flat arrays with shape
headers. Floats are written with Python's shortest round-trip repr (at most
17 significant digits), so a save/load cycle is bit exact."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .models import CcpParams, ChainBlock, ModelSpec, NcpParams

FORMAT_NAME = "cope-model"
FORMAT_VERSION = 1


def _encode_array(arr) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "data": [float(x) for x in arr.reshape(-1)]}


def _decode_array(obj, where: str) -> np.ndarray:
    shape = tuple(int(s) for s in obj["shape"])
    data = np.asarray(obj["data"], dtype=np.float64)
    if data.size != int(np.prod(shape)):
        raise ValueError(
            f"{where}: {data.size} values do not fill shape {shape}"
        )
    return data.reshape(shape)


def _encode_block(blk: ChainBlock) -> dict:
    p = blk.params
    out = {
        "kind": blk.kind,
        "consume_prev": blk.consume_prev,
        "consume_vars": list(blk.consume_vars),
        "share_conditional": p.share_conditional,
        "input_maps": [[_encode_array(m) for m in row] for row in p.input_maps],
        "head": _encode_array(p.head),
        "head_bias": _encode_array(p.head_bias),
    }
    if isinstance(p, NcpParams):
        out["state_maps"] = [_encode_array(v) for v in p.state_maps]
        out["offset_maps"] = [_encode_array(m) for m in p.offset_maps]
        out["offset_seeds"] = [_encode_array(s) for s in p.offset_seeds]
    return out


def _decode_block(obj: dict, where: str) -> ChainBlock:
    kind = obj["kind"]
    share = bool(obj.get("share_conditional", False))
    input_maps = [
        [_decode_array(m, where) for m in row] for row in obj["input_maps"]
    ]
    if share:
        for n in range(1, len(input_maps)):
            input_maps[n][1] = input_maps[0][1]
    common = {
        "input_maps": input_maps,
        "head": _decode_array(obj["head"], where),
        "head_bias": _decode_array(obj["head_bias"], where),
        "share_conditional": share,
    }
    if kind == "ccp":
        params = CcpParams(**common)
    else:
        params = NcpParams(
            state_maps=[_decode_array(v, where) for v in obj["state_maps"]],
            offset_maps=[_decode_array(m, where) for m in obj["offset_maps"]],
            offset_seeds=[_decode_array(s, where) for s in obj["offset_seeds"]],
            **common,
        )
    return ChainBlock(
        kind=kind,
        params=params,
        consume_prev=bool(obj["consume_prev"]),
        consume_vars=tuple(obj["consume_vars"]),
    )


def save_model(path, spec: ModelSpec) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "var_dims": list(spec.var_dims),
        "output_activation": spec.output_activation,
        "centering": spec.centering,
        "blocks": [_encode_block(b) for b in spec.blocks],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path) -> ModelSpec:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(
            f"{path}: format {doc.get('format')!r} is not {FORMAT_NAME!r}"
        )
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: version {doc.get('version')!r} is not {FORMAT_VERSION}"
        )
    return ModelSpec(
        var_dims=tuple(doc["var_dims"]),
        blocks=[
            _decode_block(b, f"{path} block {i}")
            for i, b in enumerate(doc["blocks"])
        ],
        output_activation=doc["output_activation"],
        centering=doc["centering"],
    )
