"""Minimal ONNX serializer.

The trainer writes model files directly at the protobuf wire level so it
has no dependency on the consumer's reader or on an onnx runtime. Only
the message fields the interchange format uses are implemented; field
numbers follow onnx.proto3.
"""

from __future__ import annotations

import struct

import numpy as np

IR_VERSION = 8
OPSET = 13

_WIRE_VARINT = 0
_WIRE_LEN = 2
_WIRE_FIXED32 = 5


def _varint(v: int) -> bytes:
    if v < 0:
        v &= (1 << 64) - 1
    chunks = []
    while True:
        lo, v = v & 0x7F, v >> 7
        if v:
            chunks.append(lo | 0x80)
        else:
            chunks.append(lo)
            return bytes(chunks)


def _tag(field: int, wire: int) -> bytes:
    return _varint((field << 3) | wire)


def _uint(field: int, v: int) -> bytes:
    return _tag(field, _WIRE_VARINT) + _varint(v)


def _blob(field: int, payload: bytes) -> bytes:
    return _tag(field, _WIRE_LEN) + _varint(len(payload)) + payload


def _text(field: int, s: str) -> bytes:
    return _blob(field, s.encode("utf-8"))


def _float32(field: int, v: float) -> bytes:
    return _tag(field, _WIRE_FIXED32) + struct.pack("<f", v)


def tensor(name: str, arr: np.ndarray) -> bytes:
    """TensorProto with raw_data payload (dims=1, data_type=2, name=8,
    raw_data=9). Float32 and int64 cover everything the format stores."""
    arr = np.ascontiguousarray(arr)
    code = {np.dtype(np.float32): 1, np.dtype(np.int64): 7}[arr.dtype]
    msg = b"".join(_uint(1, d) for d in arr.shape)
    msg += _uint(2, code)
    msg += _text(8, name)
    msg += _blob(9, arr.tobytes())
    return msg


def _attribute(name: str, value) -> bytes:
    # AttributeProto: name=1, f=2, i=3, s=4, ints=8, type=20
    msg = _text(1, name)
    if isinstance(value, bool):
        raise TypeError(f"ambiguous attribute {name}={value!r}")
    if isinstance(value, float):
        msg += _float32(2, value) + _uint(20, 1)
    elif isinstance(value, int):
        msg += _uint(3, value) + _uint(20, 2)
    elif isinstance(value, str):
        msg += _text(4, value) + _uint(20, 3)
    elif isinstance(value, (list, tuple)):
        msg += b"".join(_uint(8, int(v)) for v in value) + _uint(20, 7)
    else:
        raise TypeError(f"unsupported attribute {name}={value!r}")
    return msg


def node(op_type: str, inputs: list[str], outputs: list[str],
         name: str = "", attrs: dict | None = None) -> bytes:
    """NodeProto: input=1, output=2, name=3, op_type=4, attribute=5."""
    msg = b"".join(_text(1, s) for s in inputs)
    msg += b"".join(_text(2, s) for s in outputs)
    if name:
        msg += _text(3, name)
    msg += _text(4, op_type)
    for k, v in (attrs or {}).items():
        msg += _blob(5, _attribute(k, v))
    return msg


def value_info(name: str, dims: list) -> bytes:
    """Float tensor ValueInfoProto; string dims become dim_param."""
    shape = b""
    for d in dims:
        if isinstance(d, str):
            shape += _blob(1, _text(2, d))
        else:
            shape += _blob(1, _uint(1, int(d)))
    tensor_type = _uint(1, 1) + _blob(2, shape)
    return _text(1, name) + _blob(2, _blob(1, tensor_type))


def graph(nodes: list[bytes], initializers: list[bytes], inputs: list[bytes],
          outputs: list[bytes], name: str = "net") -> bytes:
    """GraphProto: node=1, name=2, initializer=5, input=11, output=12."""
    msg = b"".join(_blob(1, n) for n in nodes)
    msg += _text(2, name)
    msg += b"".join(_blob(5, t) for t in initializers)
    msg += b"".join(_blob(11, vi) for vi in inputs)
    msg += b"".join(_blob(12, vi) for vi in outputs)
    return msg


def model(graph_bytes: bytes, metadata: dict[str, str],
          producer: str = "onionlens-trainer") -> bytes:
    """ModelProto: ir_version=1, producer_name=2, graph=7, opset_import=8,
    metadata_props=14."""
    msg = _uint(1, IR_VERSION)
    msg += _text(2, producer)
    msg += _blob(7, graph_bytes)
    msg += _blob(8, _text(1, "") + _uint(2, OPSET))
    for k, v in metadata.items():
        msg += _blob(14, _text(1, k) + _text(2, v))
    return msg
