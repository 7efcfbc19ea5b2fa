"""Self-contained ONNX model reading and inference with numpy.

Parses the protobuf wire format directly (no protobuf dependency) into the
small subset of the ONNX schema needed to run frozen CNN feature extractors:
graph structure, initializers, tensor-type metadata, and a registry of
common inference ops.  Anything outside the registry raises
:class:`UnsupportedOperatorError` rather than computing something wrong.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import WhalesiftError


class OnnxParseError(WhalesiftError):
    """File is not a readable ONNX model."""


class UnsupportedOperatorError(WhalesiftError):
    """Model graph uses an operator this executor does not implement."""


# -- protobuf wire format ------------------------------------------------------

_WIRE_VARINT = 0
_WIRE_I64 = 1
_WIRE_LEN = 2
_WIRE_I32 = 5


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise OnnxParseError("truncated varint")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise OnnxParseError("varint too long")


def _signed64(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _parse_fields(data: bytes) -> dict[int, list[tuple[int, object]]]:
    """Decode one message into {field_number: [(wire_type, raw_value), ...]}."""
    fields: dict[int, list[tuple[int, object]]] = {}
    pos = 0
    end = len(data)
    while pos < end:
        key, pos = _read_varint(data, pos)
        num, wire = key >> 3, key & 7
        if wire == _WIRE_VARINT:
            value, pos = _read_varint(data, pos)
        elif wire == _WIRE_I64:
            value = data[pos : pos + 8]
            pos += 8
        elif wire == _WIRE_I32:
            value = data[pos : pos + 4]
            pos += 4
        elif wire == _WIRE_LEN:
            length, pos = _read_varint(data, pos)
            if pos + length > end:
                raise OnnxParseError("truncated length-delimited field")
            value = data[pos : pos + length]
            pos += length
        else:
            raise OnnxParseError(f"unsupported wire type {wire}")
        fields.setdefault(num, []).append((wire, value))
    return fields


def _first(fields: dict, num: int):
    values = fields.get(num)
    return values[0][1] if values else None


def _varint_field(fields: dict, num: int, default: int | None = None) -> int | None:
    value = _first(fields, num)
    return default if value is None else int(value)


def _string_field(fields: dict, num: int, default: str = "") -> str:
    value = _first(fields, num)
    return default if value is None else value.decode("utf-8")


def _strings_field(fields: dict, num: int) -> list[str]:
    return [raw.decode("utf-8") for _, raw in fields.get(num, [])]


def _int64s_field(fields: dict, num: int) -> list[int]:
    """Repeated int64: accepts both packed and unpacked encodings."""
    out: list[int] = []
    for wire, raw in fields.get(num, []):
        if wire == _WIRE_VARINT:
            out.append(_signed64(int(raw)))
        elif wire == _WIRE_LEN:
            pos = 0
            while pos < len(raw):
                value, pos = _read_varint(raw, pos)
                out.append(_signed64(value))
        else:
            raise OnnxParseError("unexpected wire type for int64 list")
    return out


def _floats_field(fields: dict, num: int) -> list[float]:
    out: list[float] = []
    for wire, raw in fields.get(num, []):
        if wire == _WIRE_I32:
            out.append(struct.unpack("<f", raw)[0])
        elif wire == _WIRE_LEN:
            out.extend(np.frombuffer(raw, dtype="<f4").tolist())
        else:
            raise OnnxParseError("unexpected wire type for float list")
    return out


# -- ONNX schema subset --------------------------------------------------------

_TENSOR_DTYPES = {
    1: "<f4",
    2: "u1",
    3: "i1",
    4: "<u2",
    5: "<i2",
    6: "<i4",
    7: "<i8",
    9: "?",
    10: "<f2",
    11: "<f8",
    12: "<u4",
    13: "<u8",
}


def _parse_tensor(data: bytes) -> tuple[str, np.ndarray]:
    fields = _parse_fields(data)
    dims = _int64s_field(fields, 1)
    data_type = _varint_field(fields, 2, 0)
    name = _string_field(fields, 8)
    dtype = _TENSOR_DTYPES.get(data_type)
    if dtype is None:
        raise OnnxParseError(f"tensor {name!r} has unsupported data type {data_type}")

    raw = _first(fields, 9)
    if raw is not None:
        array = np.frombuffer(raw, dtype=dtype)
    elif data_type == 1:
        array = np.array(_floats_field(fields, 4), dtype="<f4")
    elif data_type == 7:
        array = np.array(_int64s_field(fields, 7), dtype="<i8")
    elif data_type == 6:
        array = np.array(_int64s_field(fields, 5), dtype="<i4")
    elif data_type == 11:
        doubles: list[float] = []
        for wire, chunk in fields.get(10, []):
            if wire == _WIRE_LEN:
                doubles.extend(np.frombuffer(chunk, dtype="<f8").tolist())
            else:
                doubles.append(struct.unpack("<d", chunk)[0])
        array = np.array(doubles, dtype="<f8")
    else:
        array = np.array([], dtype=dtype)
    return name, array.reshape(dims) if dims else array.reshape(())


@dataclass(frozen=True)
class TensorInfo:
    """Name and (possibly dynamic) shape of a graph input or output."""

    name: str
    shape: tuple[int | None, ...]
    elem_type: int


def _parse_value_info(data: bytes) -> TensorInfo:
    fields = _parse_fields(data)
    name = _string_field(fields, 1)
    type_raw = _first(fields, 2)
    shape: tuple[int | None, ...] = ()
    elem_type = 0
    if type_raw is not None:
        tensor_type_raw = _first(_parse_fields(type_raw), 1)
        if tensor_type_raw is not None:
            tt = _parse_fields(tensor_type_raw)
            elem_type = _varint_field(tt, 1, 0)
            shape_raw = _first(tt, 2)
            if shape_raw is not None:
                dims = []
                for _, dim_raw in _parse_fields(shape_raw).get(1, []):
                    dim_fields = _parse_fields(dim_raw)
                    value = _varint_field(dim_fields, 1)
                    dims.append(int(value) if value else None)
                shape = tuple(dims)
    return TensorInfo(name=name, shape=shape, elem_type=elem_type)


def _parse_attribute(data: bytes) -> tuple[str, object]:
    fields = _parse_fields(data)
    name = _string_field(fields, 1)
    attr_type = _varint_field(fields, 20, 0)
    if attr_type == 1:  # FLOAT
        return name, struct.unpack("<f", _first(fields, 2))[0]
    if attr_type == 2:  # INT
        return name, _signed64(_varint_field(fields, 3, 0))
    if attr_type == 3:  # STRING
        return name, _first(fields, 4).decode("utf-8", errors="replace")
    if attr_type == 4:  # TENSOR
        return name, _parse_tensor(_first(fields, 5))[1]
    if attr_type == 6:  # FLOATS
        return name, _floats_field(fields, 7)
    if attr_type == 7:  # INTS
        return name, _int64s_field(fields, 8)
    # Fall back on whichever payload field is present.
    if 3 in fields:
        return name, _signed64(_varint_field(fields, 3, 0))
    if 2 in fields:
        return name, struct.unpack("<f", _first(fields, 2))[0]
    if 8 in fields:
        return name, _int64s_field(fields, 8)
    if 4 in fields:
        return name, _first(fields, 4).decode("utf-8", errors="replace")
    return name, None


@dataclass(frozen=True)
class OnnxNode:
    op_type: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    attrs: dict = field(default_factory=dict)

    def attr(self, name: str, default=None):
        return self.attrs.get(name, default)


@dataclass(frozen=True)
class OnnxModel:
    """A parsed graph: nodes in topological order plus tensors and metadata."""

    nodes: tuple[OnnxNode, ...]
    initializers: dict[str, np.ndarray]
    inputs: tuple[TensorInfo, ...]
    outputs: tuple[TensorInfo, ...]
    ir_version: int
    opset: int

    def data_inputs(self) -> tuple[TensorInfo, ...]:
        """Graph inputs that are not baked-in initializers."""
        return tuple(i for i in self.inputs if i.name not in self.initializers)


def load_model(path: str | Path) -> OnnxModel:
    path = Path(path)
    if not path.exists():
        raise OnnxParseError(f"no such model file: {path}")
    return model_from_bytes(path.read_bytes())


def model_from_bytes(data: bytes) -> OnnxModel:
    try:
        model_fields = _parse_fields(data)
        graph_raw = _first(model_fields, 7)
        if graph_raw is None:
            raise OnnxParseError("model has no graph")
        ir_version = _varint_field(model_fields, 1, 0)
        opset = 0
        for _, raw in model_fields.get(8, []):
            opset_fields = _parse_fields(raw)
            if _string_field(opset_fields, 1) == "":  # default ONNX domain
                opset = _varint_field(opset_fields, 2, 0)

        graph_fields = _parse_fields(graph_raw)
        nodes = []
        for _, raw in graph_fields.get(1, []):
            node_fields = _parse_fields(raw)
            attrs = dict(
                _parse_attribute(attr_raw) for _, attr_raw in node_fields.get(5, [])
            )
            nodes.append(
                OnnxNode(
                    op_type=_string_field(node_fields, 4),
                    inputs=tuple(_strings_field(node_fields, 1)),
                    outputs=tuple(_strings_field(node_fields, 2)),
                    attrs=attrs,
                )
            )
        initializers = dict(
            _parse_tensor(raw) for _, raw in graph_fields.get(5, [])
        )
        inputs = tuple(_parse_value_info(raw) for _, raw in graph_fields.get(11, []))
        outputs = tuple(_parse_value_info(raw) for _, raw in graph_fields.get(12, []))
    except OnnxParseError:
        raise
    except Exception as err:
        raise OnnxParseError(f"cannot parse model: {err}") from err
    return OnnxModel(
        nodes=tuple(nodes),
        initializers=initializers,
        inputs=inputs,
        outputs=outputs,
        ir_version=ir_version,
        opset=opset,
    )


# -- executor -------------------------------------------------------------------


def _pair(value, default) -> tuple[int, int]:
    if value is None:
        return default
    return int(value[0]), int(value[1])


def _conv_out_size(size: int, kernel: int, pad: int, stride: int, dilation: int) -> int:
    eff = dilation * (kernel - 1) + 1
    return (size + pad - eff) // stride + 1


def _windows(
    x: np.ndarray, kh: int, kw: int, sh: int, sw: int, dh: int = 1, dw: int = 1
) -> np.ndarray:
    """(N, C, H, W) -> strided view (N, C, OH, OW, kh, kw)."""
    n, c, h, w = x.shape
    oh = _conv_out_size(h, kh, 0, sh, dh)
    ow = _conv_out_size(w, kw, 0, sw, dw)
    sn, sc, sh_b, sw_b = x.strides
    return np.lib.stride_tricks.as_strided(
        x,
        (n, c, oh, ow, kh, kw),
        (sn, sc, sh_b * sh, sw_b * sw, sh_b * dh, sw_b * dw),
        writeable=False,
    )


def conv2d(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray | None,
    strides: tuple[int, int] = (1, 1),
    pads: tuple[int, int, int, int] = (0, 0, 0, 0),
    dilations: tuple[int, int] = (1, 1),
    group: int = 1,
) -> np.ndarray:
    """NCHW convolution via strided windows; pads are (top, left, bottom, right)."""
    m, cg, kh, kw = w.shape
    pt, pl, pb, pr = pads
    if any(pads):
        x = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    n = x.shape[0]
    mg = m // group
    outs = []
    for g in range(group):
        xs = x[:, g * cg : (g + 1) * cg]
        win = _windows(xs, kh, kw, strides[0], strides[1], dilations[0], dilations[1])
        _, _, oh, ow, _, _ = win.shape
        col = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, cg * kh * kw)
        wg = w[g * mg : (g + 1) * mg].reshape(mg, -1)
        res = col @ wg.T
        outs.append(res.reshape(n, oh, ow, mg).transpose(0, 3, 1, 2))
    out = outs[0] if group == 1 else np.concatenate(outs, axis=1)
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1)
    return out


def _op_conv(node: OnnxNode, values: list[np.ndarray]) -> np.ndarray:
    x, w = values[0], values[1]
    b = values[2] if len(values) > 2 else None
    if node.attr("auto_pad", "NOTSET") not in ("NOTSET", ""):
        raise UnsupportedOperatorError("Conv auto_pad is not supported; use explicit pads")
    kh, kw = _pair(node.attr("kernel_shape"), (w.shape[2], w.shape[3]))
    strides = _pair(node.attr("strides"), (1, 1))
    dilations = _pair(node.attr("dilations"), (1, 1))
    pads = node.attr("pads", [0, 0, 0, 0])
    if kh != w.shape[2] or kw != w.shape[3]:
        raise OnnxParseError("Conv kernel_shape disagrees with weight tensor")
    return conv2d(
        x,
        w,
        b,
        strides=strides,
        pads=(int(pads[0]), int(pads[1]), int(pads[2]), int(pads[3])),
        dilations=dilations,
        group=int(node.attr("group", 1)),
    )


def _op_pool(node: OnnxNode, values: list[np.ndarray], kind: str) -> np.ndarray:
    x = values[0]
    if node.attr("auto_pad", "NOTSET") not in ("NOTSET", ""):
        raise UnsupportedOperatorError(f"{node.op_type} auto_pad is not supported")
    kh, kw = _pair(node.attr("kernel_shape"), (1, 1))
    strides = _pair(node.attr("strides"), (1, 1))
    pads = node.attr("pads", [0, 0, 0, 0])
    pt, pl, pb, pr = (int(p) for p in pads)
    if kind == "max":
        if any((pt, pl, pb, pr)):
            x = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=-np.inf)
        return _windows(x, kh, kw, *strides).max(axis=(4, 5))
    if any((pt, pl, pb, pr)):
        if not node.attr("count_include_pad", 0):
            # Average of only the valid cells: divide the padded sum by a
            # same-shape count of unpadded contributors.
            ones = np.ones_like(x[:1, :1])
            ones = np.pad(ones, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
            counts = _windows(ones, kh, kw, *strides).sum(axis=(4, 5))
            x = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
            return _windows(x, kh, kw, *strides).sum(axis=(4, 5)) / counts
        x = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    return _windows(x, kh, kw, *strides).mean(axis=(4, 5))


def _op_gemm(node: OnnxNode, values: list[np.ndarray]) -> np.ndarray:
    a, b = values[0], values[1]
    if node.attr("transA", 0):
        a = a.T
    if node.attr("transB", 0):
        b = b.T
    out = float(node.attr("alpha", 1.0)) * (a @ b)
    if len(values) > 2:
        out = out + float(node.attr("beta", 1.0)) * values[2]
    return out


def _op_reshape(node: OnnxNode, values: list[np.ndarray]) -> np.ndarray:
    data = values[0]
    shape = [int(s) for s in values[1]]
    resolved = [
        data.shape[i] if s == 0 and not node.attr("allowzero", 0) else s
        for i, s in enumerate(shape)
    ]
    return data.reshape(resolved)


def _op_batchnorm(node: OnnxNode, values: list[np.ndarray]) -> np.ndarray:
    x, scale, bias, mean, var = values[:5]
    eps = float(node.attr("epsilon", 1e-5))
    shape = (1, -1) + (1,) * (x.ndim - 2)
    return (x - mean.reshape(shape)) / np.sqrt(var.reshape(shape) + eps) * scale.reshape(
        shape
    ) + bias.reshape(shape)


def _op_softmax(node: OnnxNode, values: list[np.ndarray]) -> np.ndarray:
    axis = int(node.attr("axis", -1))
    x = values[0]
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _op_squeeze(node: OnnxNode, values: list[np.ndarray]) -> np.ndarray:
    axes = node.attr("axes")
    if axes is None and len(values) > 1:
        axes = [int(a) for a in values[1]]
    if axes is None:
        return np.squeeze(values[0])
    return np.squeeze(values[0], axis=tuple(int(a) for a in axes))


def _op_unsqueeze(node: OnnxNode, values: list[np.ndarray]) -> np.ndarray:
    axes = node.attr("axes")
    if axes is None and len(values) > 1:
        axes = [int(a) for a in values[1]]
    out = values[0]
    for axis in sorted(int(a) for a in axes):
        out = np.expand_dims(out, axis)
    return out


def _op_clip(node: OnnxNode, values: list[np.ndarray]) -> np.ndarray:
    lo = node.attr("min")
    hi = node.attr("max")
    if len(values) > 1 and values[1].size:
        lo = float(values[1])
    if len(values) > 2 and values[2].size:
        hi = float(values[2])
    return np.clip(values[0], lo, hi)


_OPS = {
    "Conv": _op_conv,
    "Relu": lambda node, v: np.maximum(v[0], 0),
    "Sigmoid": lambda node, v: 1.0 / (1.0 + np.exp(-v[0])),
    "Tanh": lambda node, v: np.tanh(v[0]),
    "Add": lambda node, v: v[0] + v[1],
    "Sub": lambda node, v: v[0] - v[1],
    "Mul": lambda node, v: v[0] * v[1],
    "Div": lambda node, v: v[0] / v[1],
    "MaxPool": lambda node, v: _op_pool(node, v, "max"),
    "AveragePool": lambda node, v: _op_pool(node, v, "avg"),
    "GlobalAveragePool": lambda node, v: v[0].mean(axis=(2, 3), keepdims=True),
    "Gemm": _op_gemm,
    "MatMul": lambda node, v: v[0] @ v[1],
    "Flatten": lambda node, v: v[0].reshape(
        int(np.prod(v[0].shape[: int(node.attr("axis", 1))]) or 1), -1
    ),
    "Reshape": _op_reshape,
    "Concat": lambda node, v: np.concatenate(v, axis=int(node.attr("axis"))),
    "BatchNormalization": _op_batchnorm,
    "Identity": lambda node, v: v[0],
    "Dropout": lambda node, v: v[0],
    "Softmax": _op_softmax,
    "Transpose": lambda node, v: np.transpose(
        v[0], node.attr("perm") and [int(p) for p in node.attr("perm")]
    ),
    "Squeeze": _op_squeeze,
    "Unsqueeze": _op_unsqueeze,
    "Clip": _op_clip,
}


def supported_ops() -> tuple[str, ...]:
    return tuple(sorted(_OPS))


def check_supported(model: OnnxModel) -> None:
    """Raise if any node's operator is outside the registry."""
    unknown = sorted({n.op_type for n in model.nodes if n.op_type not in _OPS})
    if unknown:
        raise UnsupportedOperatorError(
            f"unsupported operator(s) in model graph: {', '.join(unknown)}"
        )


def run_model(model: OnnxModel, inputs: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Execute the graph (nodes are in topological order per the format)."""
    check_supported(model)
    env: dict[str, np.ndarray] = dict(model.initializers)
    env.update(inputs)
    for info in model.data_inputs():
        if info.name not in env:
            raise ValueError(f"missing graph input {info.name!r}")
    for node in model.nodes:
        values = [env[name] for name in node.inputs if name]
        result = _OPS[node.op_type](node, values)
        env[node.outputs[0]] = result
        # Secondary outputs (e.g. Dropout's mask) are never consumed by the
        # graphs this executor accepts; fail loudly if one is.
        for extra in node.outputs[1:]:
            if extra:
                env[extra] = None
    return {info.name: env[info.name] for info in model.outputs}
