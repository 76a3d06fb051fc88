"""Minimal ONNX model file reader/writer.

Implements the protobuf wire format directly for the message subset the
engine needs (ModelProto / GraphProto / NodeProto / TensorProto /
AttributeProto / ValueInfoProto and friends). Unknown fields are skipped
on read, so files produced by full ONNX toolchains parse as long as they
stay inside the supported operator subset. The writer emits valid ONNX
(ir_version 8, default opset 13) with float tensors stored as raw data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

IR_VERSION = 8
DEFAULT_OPSET = 13

# TensorProto.DataType values
DT_FLOAT = 1
DT_INT32 = 6
DT_INT64 = 7
DT_DOUBLE = 11

_NP_FROM_DT = {
    DT_FLOAT: np.dtype("<f4"),
    DT_INT32: np.dtype("<i4"),
    DT_INT64: np.dtype("<i8"),
    DT_DOUBLE: np.dtype("<f8"),
}
_DT_FROM_NP = {
    np.dtype(np.float32): DT_FLOAT,
    np.dtype(np.int32): DT_INT32,
    np.dtype(np.int64): DT_INT64,
    np.dtype(np.float64): DT_DOUBLE,
}

# AttributeProto.AttributeType values
AT_FLOAT, AT_INT, AT_STRING, AT_TENSOR = 1, 2, 3, 4
AT_FLOATS, AT_INTS, AT_STRINGS = 6, 7, 8


@dataclass
class ValueInfo:
    name: str
    elem_type: int = DT_FLOAT
    # each dim: int for a fixed size, str for a named dynamic dim, None if absent
    dims: list = field(default_factory=list)


@dataclass
class NodeDef:
    op_type: str
    name: str = ""
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    attrs: dict = field(default_factory=dict)


@dataclass
class GraphDef:
    name: str = ""
    nodes: list[NodeDef] = field(default_factory=list)
    initializers: dict[str, np.ndarray] = field(default_factory=dict)
    inputs: list[ValueInfo] = field(default_factory=list)
    outputs: list[ValueInfo] = field(default_factory=list)


@dataclass
class ModelDef:
    graph: GraphDef
    ir_version: int = IR_VERSION
    opset: int = DEFAULT_OPSET
    producer_name: str = ""
    metadata: dict[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# wire-level primitives
# ---------------------------------------------------------------------------

def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise ParseError("truncated varint")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise ParseError("varint too long")


def _signed64(v: int) -> int:
    v &= (1 << 64) - 1
    return v - (1 << 64) if v >= (1 << 63) else v


def _iter_fields(buf: bytes):
    pos = 0
    while pos < len(buf):
        key, pos = _read_varint(buf, pos)
        fno, wt = key >> 3, key & 7
        if wt == 0:
            val, pos = _read_varint(buf, pos)
        elif wt == 1:
            if pos + 8 > len(buf):
                raise ParseError("truncated fixed64 field")
            val, pos = buf[pos:pos + 8], pos + 8
        elif wt == 2:
            ln, pos = _read_varint(buf, pos)
            if pos + ln > len(buf):
                raise ParseError("truncated length-delimited field")
            val, pos = buf[pos:pos + ln], pos + ln
        elif wt == 5:
            if pos + 4 > len(buf):
                raise ParseError("truncated fixed32 field")
            val, pos = buf[pos:pos + 4], pos + 4
        else:
            raise ParseError(f"unsupported wire type {wt}")
        yield fno, wt, val


def _as_bytes(val) -> bytes:
    """Guard for fields that must be length-delimited on the wire."""
    if not isinstance(val, (bytes, bytearray)):
        raise ParseError("wire type mismatch: expected length-delimited field")
    return bytes(val)


def _as_int(val) -> int:
    """Guard for fields that must be varint on the wire."""
    if not isinstance(val, int):
        raise ParseError("wire type mismatch: expected varint field")
    return val


def _packed_or_single(values: list, wt: int, val, conv):
    """Collect a repeated scalar field that may be packed or not."""
    if wt == 2:
        pos = 0
        while pos < len(val):
            v, pos = _read_varint(val, pos)
            values.append(conv(v))
    else:
        values.append(conv(_as_int(val)))


# ---------------------------------------------------------------------------
# message decoding
# ---------------------------------------------------------------------------

def _decode_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    data_type = DT_FLOAT
    name = ""
    raw = None
    float_data: list[float] = []
    int_data: list[int] = []
    double_data: list[float] = []
    for fno, wt, val in _iter_fields(buf):
        if fno == 1:
            _packed_or_single(dims, wt, val, _signed64)
        elif fno == 2:
            data_type = _as_int(val)
        elif fno == 4:
            if wt == 2:
                float_data.extend(np.frombuffer(val, dtype="<f4").tolist())
            else:
                float_data.append(struct.unpack("<f", _as_bytes(val))[0])
        elif fno in (5, 7):
            _packed_or_single(int_data, wt, val, _signed64)
        elif fno == 8:
            name = _as_bytes(val).decode("utf-8")
        elif fno == 9:
            raw = _as_bytes(val)
        elif fno == 10:
            if wt == 2:
                double_data.extend(np.frombuffer(val, dtype="<f8").tolist())
            else:
                double_data.append(struct.unpack("<d", _as_bytes(val))[0])
    dtype = _NP_FROM_DT.get(data_type)
    if dtype is None:
        raise ParseError(f"unsupported tensor data type {data_type} for {name!r}")
    shape = tuple(dims)
    if raw is not None:
        arr = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    elif float_data:
        arr = np.array(float_data, dtype=dtype).reshape(shape)
    elif double_data:
        arr = np.array(double_data, dtype=dtype).reshape(shape)
    elif int_data:
        arr = np.array(int_data, dtype=dtype).reshape(shape)
    else:
        arr = np.zeros(shape, dtype=dtype)
    return name, arr


def _decode_attribute(buf: bytes) -> tuple[str, object]:
    name = ""
    atype = None
    f_val = i_val = s_val = t_val = None
    floats: list[float] = []
    ints: list[int] = []
    strings: list[str] = []
    for fno, wt, val in _iter_fields(buf):
        if fno == 1:
            name = _as_bytes(val).decode("utf-8")
        elif fno == 2:
            f_val = struct.unpack("<f", _as_bytes(val))[0]
        elif fno == 3:
            i_val = _signed64(_as_int(val))
        elif fno == 4:
            s_val = _as_bytes(val).decode("utf-8", errors="replace")
        elif fno == 5:
            t_val = _decode_tensor(_as_bytes(val))[1]
        elif fno == 7:
            floats.extend(np.frombuffer(_as_bytes(val), dtype="<f4").tolist())
        elif fno == 8:
            _packed_or_single(ints, wt, val, _signed64)
        elif fno == 9:
            strings.append(_as_bytes(val).decode("utf-8", errors="replace"))
        elif fno == 20:
            atype = _as_int(val)
    if atype == AT_FLOAT or (atype is None and f_val is not None):
        return name, f_val
    if atype == AT_INT or (atype is None and i_val is not None):
        return name, i_val
    if atype == AT_STRING or (atype is None and s_val is not None):
        return name, s_val
    if atype == AT_TENSOR or (atype is None and t_val is not None):
        return name, t_val
    if atype == AT_FLOATS or (atype is None and floats):
        return name, [float(v) for v in floats]
    if atype == AT_INTS or (atype is None and ints):
        return name, [int(v) for v in ints]
    if atype == AT_STRINGS or (atype is None and strings):
        return name, strings
    return name, None


def _decode_node(buf: bytes) -> NodeDef:
    node = NodeDef(op_type="")
    for fno, wt, val in _iter_fields(buf):
        if fno == 1:
            node.inputs.append(_as_bytes(val).decode("utf-8"))
        elif fno == 2:
            node.outputs.append(_as_bytes(val).decode("utf-8"))
        elif fno == 3:
            node.name = _as_bytes(val).decode("utf-8")
        elif fno == 4:
            node.op_type = _as_bytes(val).decode("utf-8")
        elif fno == 5:
            k, v = _decode_attribute(_as_bytes(val))
            node.attrs[k] = v
    return node


def _decode_dims(buf: bytes) -> list:
    dims = []
    for fno, wt, val in _iter_fields(buf):
        if fno == 1:  # Dimension message
            dim_value = dim_param = None
            for f2, _, v2 in _iter_fields(_as_bytes(val)):
                if f2 == 1:
                    dim_value = _signed64(_as_int(v2))
                elif f2 == 2:
                    dim_param = _as_bytes(v2).decode("utf-8")
            dims.append(dim_value if dim_value is not None else dim_param)
    return dims


def _decode_value_info(buf: bytes) -> ValueInfo:
    vi = ValueInfo(name="")
    for fno, wt, val in _iter_fields(buf):
        if fno == 1:
            vi.name = _as_bytes(val).decode("utf-8")
        elif fno == 2:  # TypeProto
            for f2, _, v2 in _iter_fields(_as_bytes(val)):
                if f2 == 1:  # tensor_type
                    for f3, _, v3 in _iter_fields(_as_bytes(v2)):
                        if f3 == 1:
                            vi.elem_type = _as_int(v3)
                        elif f3 == 2:
                            vi.dims = _decode_dims(_as_bytes(v3))
    return vi


def _decode_graph(buf: bytes) -> GraphDef:
    g = GraphDef()
    for fno, wt, val in _iter_fields(buf):
        if fno == 1:
            g.nodes.append(_decode_node(_as_bytes(val)))
        elif fno == 2:
            g.name = _as_bytes(val).decode("utf-8")
        elif fno == 5:
            name, arr = _decode_tensor(_as_bytes(val))
            g.initializers[name] = arr
        elif fno == 11:
            g.inputs.append(_decode_value_info(_as_bytes(val)))
        elif fno == 12:
            g.outputs.append(_decode_value_info(_as_bytes(val)))
    return g


def decode_model(data: bytes) -> ModelDef:
    graph = None
    ir_version = 0
    opset = 0
    producer = ""
    metadata: dict[str, str] = {}
    try:
        for fno, wt, val in _iter_fields(data):
            if fno == 1:
                ir_version = _as_int(val)
            elif fno == 2:
                producer = _as_bytes(val).decode("utf-8", errors="replace")
            elif fno == 7:
                graph = _decode_graph(_as_bytes(val))
            elif fno == 8:
                dom, ver = "", 0
                for f2, _, v2 in _iter_fields(_as_bytes(val)):
                    if f2 == 1:
                        dom = _as_bytes(v2).decode("utf-8")
                    elif f2 == 2:
                        ver = _as_int(v2)
                if dom in ("", "ai.onnx"):
                    opset = max(opset, ver)
            elif fno == 14:
                k = v = ""
                for f2, _, v2 in _iter_fields(_as_bytes(val)):
                    if f2 == 1:
                        k = _as_bytes(v2).decode("utf-8")
                    elif f2 == 2:
                        v = _as_bytes(v2).decode("utf-8")
                metadata[k] = v
    except (struct.error, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}") from exc
    if graph is None:
        raise ParseError("model file has no graph")
    return ModelDef(graph=graph, ir_version=ir_version, opset=opset or DEFAULT_OPSET,
                    producer_name=producer, metadata=metadata)


def read_model(path: str) -> ModelDef:
    with open(path, "rb") as fh:
        return decode_model(fh.read())


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

def _varint(v: int) -> bytes:
    if v < 0:
        v &= (1 << 64) - 1
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _tag(fno: int, wt: int) -> bytes:
    return _varint((fno << 3) | wt)


def _f_varint(fno: int, v: int) -> bytes:
    return _tag(fno, 0) + _varint(v)


def _f_bytes(fno: int, v: bytes) -> bytes:
    return _tag(fno, 2) + _varint(len(v)) + v


def _f_str(fno: int, v: str) -> bytes:
    return _f_bytes(fno, v.encode("utf-8"))


def _f_float(fno: int, v: float) -> bytes:
    return _tag(fno, 5) + struct.pack("<f", v)


def _encode_tensor(name: str, arr: np.ndarray) -> bytes:
    dt = _DT_FROM_NP.get(arr.dtype)
    if dt is None:
        raise ValueError(f"unsupported tensor dtype {arr.dtype} for {name!r}")
    parts = [b"".join(_f_varint(1, int(d)) for d in arr.shape),
             _f_varint(2, dt),
             _f_str(8, name),
             _f_bytes(9, np.ascontiguousarray(arr).tobytes())]
    return b"".join(parts)


def _encode_attribute(name: str, value) -> bytes:
    parts = [_f_str(1, name)]
    if isinstance(value, bool):
        raise ValueError(f"ambiguous bool attribute {name!r}")
    if isinstance(value, float):
        parts += [_f_float(2, value), _f_varint(20, AT_FLOAT)]
    elif isinstance(value, int):
        parts += [_f_varint(3, value), _f_varint(20, AT_INT)]
    elif isinstance(value, str):
        parts += [_f_str(4, value), _f_varint(20, AT_STRING)]
    elif isinstance(value, np.ndarray):
        parts += [_f_bytes(5, _encode_tensor("", value)), _f_varint(20, AT_TENSOR)]
    elif isinstance(value, (list, tuple)) and all(isinstance(v, int) for v in value):
        parts += [b"".join(_f_varint(8, int(v)) for v in value), _f_varint(20, AT_INTS)]
    elif isinstance(value, (list, tuple)) and all(isinstance(v, float) for v in value):
        parts += [b"".join(_f_float(7, float(v)) for v in value), _f_varint(20, AT_FLOATS)]
    elif isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value):
        parts += [b"".join(_f_str(9, v) for v in value), _f_varint(20, AT_STRINGS)]
    else:
        raise ValueError(f"unsupported attribute value for {name!r}: {value!r}")
    return b"".join(parts)


def _encode_node(node: NodeDef) -> bytes:
    parts = [_f_str(1, s) for s in node.inputs]
    parts += [_f_str(2, s) for s in node.outputs]
    if node.name:
        parts.append(_f_str(3, node.name))
    parts.append(_f_str(4, node.op_type))
    parts += [_f_bytes(5, _encode_attribute(k, v)) for k, v in node.attrs.items()]
    return b"".join(parts)


def _encode_value_info(vi: ValueInfo) -> bytes:
    dims = b""
    for d in vi.dims:
        if isinstance(d, int):
            dim = _f_varint(1, d)
        elif isinstance(d, str):
            dim = _f_str(2, d)
        else:
            dim = b""
        dims += _f_bytes(1, dim)
    tensor_type = _f_varint(1, vi.elem_type) + _f_bytes(2, dims)
    type_proto = _f_bytes(1, tensor_type)
    return _f_str(1, vi.name) + _f_bytes(2, type_proto)


def _encode_graph(g: GraphDef) -> bytes:
    parts = [_f_bytes(1, _encode_node(n)) for n in g.nodes]
    if g.name:
        parts.append(_f_str(2, g.name))
    parts += [_f_bytes(5, _encode_tensor(name, arr)) for name, arr in g.initializers.items()]
    parts += [_f_bytes(11, _encode_value_info(vi)) for vi in g.inputs]
    parts += [_f_bytes(12, _encode_value_info(vi)) for vi in g.outputs]
    return b"".join(parts)


def encode_model(model: ModelDef) -> bytes:
    parts = [_f_varint(1, model.ir_version)]
    if model.producer_name:
        parts.append(_f_str(2, model.producer_name))
    parts.append(_f_bytes(7, _encode_graph(model.graph)))
    opset_entry = _f_str(1, "") + _f_varint(2, model.opset)
    parts.append(_f_bytes(8, opset_entry))
    for k, v in model.metadata.items():
        parts.append(_f_bytes(14, _f_str(1, k) + _f_str(2, v)))
    return b"".join(parts)


def write_model(model: ModelDef, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_model(model))
