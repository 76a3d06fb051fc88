"""Model loading and validation.

Reads the ONNX-subset interchange file, checks every node against the
supported operator set, runs shape inference over the whole graph and
extracts the metadata (class order, preprocessing recipe, parameter
counts) that the engine needs at classification time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import onnxio
from .errors import (
    MissingMetadata,
    ParseError,
    ShapeMismatch,
    UnsupportedOperator,
)
from .taxonomy import CATEGORIES, Category, UnknownLabel, resolve_category

SUPPORTED_OPS = frozenset({
    "Conv", "BatchNormalization", "Relu", "MaxPool",
    "GlobalAveragePool", "Flatten", "Gemm", "Add", "Softmax",
})

NUM_CLASSES = 5


@dataclass(frozen=True)
class PreprocSpec:
    """Preprocessing recipe stored in the model file.

    Pixel values x in 0..255 are resized to size x size, then mapped to
    (x/255 - mean)/scale per channel, CHW order.
    """

    size: int = 224
    mean: tuple[float, float, float] = (0.485, 0.456, 0.406)
    scale: tuple[float, float, float] = (0.229, 0.224, 0.225)
    resize: str = "bilinear"
    channel_order: str = "rgb"

    @classmethod
    def from_json(cls, text: str) -> "PreprocSpec":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MissingMetadata(f"preproc metadata is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise MissingMetadata("preproc metadata must be a JSON object")
        try:
            size = int(raw["size"])
            mean = tuple(float(v) for v in raw["mean"])
            scale = tuple(float(v) for v in raw["scale"])
            resize = str(raw["resize"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MissingMetadata(f"preproc metadata incomplete: {exc!r}") from exc
        order = str(raw.get("channel_order", "rgb"))
        if size < 1:
            raise MissingMetadata("preproc size must be positive")
        if len(mean) != 3 or len(scale) != 3:
            raise MissingMetadata("preproc mean/scale must have three entries")
        if any(s == 0 for s in scale):
            raise MissingMetadata("preproc scale entries must be non-zero")
        if resize != "bilinear":
            raise MissingMetadata(f"unsupported resize method {resize!r}")
        if order != "rgb":
            raise MissingMetadata(f"unsupported channel order {order!r}")
        return cls(size=size, mean=mean, scale=scale, resize=resize, channel_order=order)

    def to_json(self) -> str:
        return json.dumps({
            "size": self.size,
            "mean": list(self.mean),
            "scale": list(self.scale),
            "resize": self.resize,
            "channel_order": self.channel_order,
        }, sort_keys=True)


@dataclass
class ModelGraph:
    """A validated, topologically ordered model ready for inference."""

    nodes: list[onnxio.NodeDef]
    initializers: dict[str, np.ndarray]
    input_name: str
    input_shape: tuple  # entries are int or None (dynamic batch)
    output_name: str
    class_order: tuple[Category, ...]
    preproc: PreprocSpec
    total_params: int
    trainable_params: int
    shapes: dict[str, tuple] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)
    producer_name: str = ""
    opset: int = onnxio.DEFAULT_OPSET


def count_parameters(graph: onnxio.GraphDef) -> int:
    """Total number of stored weight elements (weights and biases)."""
    return sum(int(arr.size) for arr in graph.initializers.values())


# ---------------------------------------------------------------------------
# shape inference
# ---------------------------------------------------------------------------

def _norm_dims(dims) -> tuple:
    out = []
    for d in dims:
        if isinstance(d, int) and d > 0:
            out.append(d)
        else:
            out.append(None)  # named or absent dims are dynamic
    return tuple(out)


def _numel(shape: tuple) -> int:
    n = 1
    for d in shape:
        n *= 1 if d is None else d
    return n


def _pool_out(size: int, pad_b: int, pad_e: int, k: int, stride: int,
              node: str) -> int:
    out = (size + pad_b + pad_e - k) // stride + 1
    if out < 1:
        raise ShapeMismatch(node, f"window {k} does not fit input extent {size}")
    return out


def _require_attr_ints(node: onnxio.NodeDef, name: str, default=None) -> list[int]:
    val = node.attrs.get(name, default)
    if val is None:
        raise ShapeMismatch(node.name, f"missing required attribute {name!r}")
    if isinstance(val, int):
        return [val]
    return [int(v) for v in val]


def _check_auto_pad(node: onnxio.NodeDef) -> None:
    ap = node.attrs.get("auto_pad", "NOTSET")
    if ap not in ("NOTSET", ""):
        raise UnsupportedOperator(node.op_type, f"auto_pad={ap!r} (explicit pads only)")


def _infer_conv(node, in_shape, weights, node_name):
    if len(in_shape) != 4:
        raise ShapeMismatch(node_name, f"Conv expects 4-D input, got {in_shape}")
    _check_auto_pad(node)
    group = node.attrs.get("group", 1)
    if group != 1:
        raise UnsupportedOperator("Conv", f"group={group}")
    dil = node.attrs.get("dilations", [1, 1])
    if any(d != 1 for d in (dil if isinstance(dil, list) else [dil])):
        raise UnsupportedOperator("Conv", f"dilations={dil}")
    w = weights.get(node.inputs[1])
    if w is None:
        raise ShapeMismatch(node_name, f"weight {node.inputs[1]!r} is not an initializer")
    if w.ndim != 4:
        raise ShapeMismatch(node_name, f"Conv weight must be 4-D, got {w.shape}")
    m, c, kh, kw = w.shape
    if in_shape[1] is not None and in_shape[1] != c:
        raise ShapeMismatch(node_name, f"input channels {in_shape[1]} != weight channels {c}")
    ks = node.attrs.get("kernel_shape")
    if ks is not None and list(ks) != [kh, kw]:
        raise ShapeMismatch(node_name, f"kernel_shape {ks} != weight spatial dims {(kh, kw)}")
    strides = _require_attr_ints(node, "strides", [1, 1])
    pads = _require_attr_ints(node, "pads", [0, 0, 0, 0])
    if len(strides) != 2 or len(pads) != 4:
        raise ShapeMismatch(node_name, f"bad strides/pads {strides}/{pads}")
    if len(node.inputs) > 2:
        b = weights.get(node.inputs[2])
        if b is None or b.shape != (m,):
            raise ShapeMismatch(node_name, f"Conv bias must be shape ({m},)")
    oh = _pool_out(in_shape[2], pads[0], pads[2], kh, strides[0], node_name)
    ow = _pool_out(in_shape[3], pads[1], pads[3], kw, strides[1], node_name)
    return (in_shape[0], m, oh, ow)


def _infer_maxpool(node, in_shape, node_name):
    if len(in_shape) != 4:
        raise ShapeMismatch(node_name, f"MaxPool expects 4-D input, got {in_shape}")
    _check_auto_pad(node)
    if node.attrs.get("ceil_mode", 0) != 0:
        raise UnsupportedOperator("MaxPool", "ceil_mode=1")
    dil = node.attrs.get("dilations", [1, 1])
    if any(d != 1 for d in (dil if isinstance(dil, list) else [dil])):
        raise UnsupportedOperator("MaxPool", f"dilations={dil}")
    ks = _require_attr_ints(node, "kernel_shape")
    strides = _require_attr_ints(node, "strides", [1, 1])
    pads = _require_attr_ints(node, "pads", [0, 0, 0, 0])
    if len(ks) != 2 or len(strides) != 2 or len(pads) != 4:
        raise ShapeMismatch(node_name, "MaxPool attributes must be 2-D")
    if pads[0] >= ks[0] or pads[1] >= ks[1] or pads[2] >= ks[0] or pads[3] >= ks[1]:
        raise ShapeMismatch(node_name, f"pads {pads} not smaller than kernel {ks}")
    oh = _pool_out(in_shape[2], pads[0], pads[2], ks[0], strides[0], node_name)
    ow = _pool_out(in_shape[3], pads[1], pads[3], ks[1], strides[1], node_name)
    return (in_shape[0], in_shape[1], oh, ow)


def _infer_batchnorm(node, in_shape, weights, node_name):
    if len(in_shape) < 2:
        raise ShapeMismatch(node_name, f"BatchNormalization needs a channel dim, got {in_shape}")
    if len(node.inputs) != 5:
        raise ShapeMismatch(node_name, "BatchNormalization expects 5 inputs")
    if len(node.outputs) != 1:
        raise UnsupportedOperator("BatchNormalization", "training outputs are not supported")
    c = in_shape[1]
    for name in node.inputs[1:]:
        p = weights.get(name)
        if p is None:
            raise ShapeMismatch(node_name, f"parameter {name!r} is not an initializer")
        if p.ndim != 1 or (c is not None and p.shape[0] != c):
            raise ShapeMismatch(node_name, f"parameter {name!r} shape {p.shape} != ({c},)")
    return in_shape


def _infer_flatten(node, in_shape, node_name):
    axis = node.attrs.get("axis", 1)
    rank = len(in_shape)
    if not -rank <= axis <= rank:
        raise ShapeMismatch(node_name, f"Flatten axis {axis} out of range for rank {rank}")
    axis = axis % rank if axis != rank else rank

    def seg(dims):
        if not dims:
            return 1
        if None in dims:
            if len(dims) == 1:
                return None
            raise ShapeMismatch(node_name, "cannot flatten across a dynamic dimension")
        return math.prod(dims)

    return (seg(in_shape[:axis]), seg(in_shape[axis:]))


def _infer_gemm(node, in_shape, weights, node_name):
    if len(in_shape) != 2:
        raise ShapeMismatch(node_name, f"Gemm expects 2-D input, got {in_shape}")
    if node.attrs.get("transA", 0) != 0:
        raise UnsupportedOperator("Gemm", "transA=1")
    if node.attrs.get("alpha", 1.0) != 1.0 or node.attrs.get("beta", 1.0) != 1.0:
        raise UnsupportedOperator("Gemm", "alpha/beta must be 1.0")
    w = weights.get(node.inputs[1])
    if w is None:
        raise ShapeMismatch(node_name, f"weight {node.inputs[1]!r} is not an initializer")
    if w.ndim != 2:
        raise ShapeMismatch(node_name, f"Gemm weight must be 2-D, got {w.shape}")
    trans_b = node.attrs.get("transB", 0)
    out_f, in_f = w.shape if trans_b else (w.shape[1], w.shape[0])
    if in_shape[1] is not None and in_shape[1] != in_f:
        raise ShapeMismatch(node_name, f"input features {in_shape[1]} != weight features {in_f}")
    if len(node.inputs) > 2:
        b = weights.get(node.inputs[2])
        if b is None or b.shape not in ((out_f,), (1, out_f)):
            raise ShapeMismatch(node_name, f"Gemm bias must have {out_f} elements")
    return (in_shape[0], out_f)


def _broadcast(a: tuple, b: tuple, node_name: str) -> tuple:
    out = []
    for da, db in zip((1,) * (len(b) - len(a)) + a, (1,) * (len(a) - len(b)) + b):
        if da == db:
            out.append(da)
        elif db == 1:
            out.append(da)
        elif da == 1:
            out.append(db)
        elif da is None or db is None:
            # dynamic vs fixed: assume the dynamic side matches at runtime
            out.append(da if da is not None else db)
        else:
            raise ShapeMismatch(node_name, f"cannot broadcast {a} with {b}")
    return tuple(out)


def _infer_softmax(node, in_shape, node_name):
    axis = node.attrs.get("axis", -1)
    rank = len(in_shape)
    if not -rank <= axis < rank:
        raise ShapeMismatch(node_name, f"Softmax axis {axis} out of range for rank {rank}")
    return in_shape


def infer_shapes(graph: onnxio.GraphDef, ordered: list[onnxio.NodeDef],
                 input_name: str, input_shape: tuple) -> dict[str, tuple]:
    """Propagate shapes through the ordered node list."""
    shapes: dict[str, tuple] = {input_name: input_shape}
    weights = graph.initializers
    for node in ordered:
        nid = node.name or node.op_type
        act_inputs = [i for i in node.inputs if i and i not in weights]
        for name in act_inputs:
            if name not in shapes:
                raise ShapeMismatch(nid, f"input {name!r} has no producer")
        if node.op_type == "Conv":
            out = _infer_conv(node, shapes[act_inputs[0]], weights, nid)
        elif node.op_type == "MaxPool":
            out = _infer_maxpool(node, shapes[act_inputs[0]], nid)
        elif node.op_type == "BatchNormalization":
            out = _infer_batchnorm(node, shapes[act_inputs[0]], weights, nid)
        elif node.op_type == "Relu":
            out = shapes[act_inputs[0]]
        elif node.op_type == "GlobalAveragePool":
            s = shapes[act_inputs[0]]
            if len(s) != 4:
                raise ShapeMismatch(nid, f"GlobalAveragePool expects 4-D input, got {s}")
            out = (s[0], s[1], 1, 1)
        elif node.op_type == "Flatten":
            out = _infer_flatten(node, shapes[act_inputs[0]], nid)
        elif node.op_type == "Gemm":
            out = _infer_gemm(node, shapes[act_inputs[0]], weights, nid)
        elif node.op_type == "Add":
            if len(node.inputs) != 2:
                raise ShapeMismatch(nid, "Add expects exactly 2 inputs")
            sa = shapes.get(node.inputs[0], None)
            sb = shapes.get(node.inputs[1], None)
            if sa is None:
                sa = tuple(weights[node.inputs[0]].shape)
            if sb is None:
                sb = tuple(weights[node.inputs[1]].shape)
            out = _broadcast(sa, sb, nid)
        elif node.op_type == "Softmax":
            out = _infer_softmax(node, shapes[act_inputs[0]], nid)
        else:  # pragma: no cover - filtered earlier
            raise UnsupportedOperator(node.op_type)
        if len(node.outputs) != 1 or not node.outputs[0]:
            raise ShapeMismatch(nid, "every node must have exactly one output")
        shapes[node.outputs[0]] = out
    return shapes


# ---------------------------------------------------------------------------
# graph ordering and validation
# ---------------------------------------------------------------------------

def toposort(graph: onnxio.GraphDef, input_name: str) -> list[onnxio.NodeDef]:
    """Stable topological order of the graph's nodes.

    Ties resolve in file order so loading is deterministic.
    """
    known = {input_name} | set(graph.initializers)
    pending = list(graph.nodes)
    ordered: list[onnxio.NodeDef] = []
    while pending:
        progressed = False
        remaining = []
        for node in pending:
            if all((not i) or i in known for i in node.inputs):
                ordered.append(node)
                known.update(o for o in node.outputs if o)
                progressed = True
            else:
                remaining.append(node)
        if not progressed:
            nid = remaining[0].name or remaining[0].op_type
            missing = [i for i in remaining[0].inputs if i and i not in known]
            raise ShapeMismatch(nid, f"unresolvable inputs {missing} (cycle or dangling edge)")
        pending = remaining
    return ordered


def _parse_class_order(meta: dict[str, str]) -> tuple[Category, ...]:
    raw = meta.get("class_order")
    if not raw:
        raise MissingMetadata("model metadata lacks class_order")
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != NUM_CLASSES:
        raise MissingMetadata(f"class_order must list {NUM_CLASSES} categories, got {len(parts)}")
    try:
        cats = tuple(resolve_category(p) for p in parts)
    except UnknownLabel as exc:
        raise MissingMetadata(f"class_order contains unknown label: {exc}") from exc
    if len({c.index for c in cats}) != NUM_CLASSES:
        raise MissingMetadata("class_order contains duplicate categories")
    return cats


def validate_model(model: onnxio.ModelDef) -> ModelGraph:
    """Validate a decoded model and return the inference-ready graph."""
    graph = model.graph
    for node in graph.nodes:
        if node.op_type not in SUPPORTED_OPS:
            raise UnsupportedOperator(node.op_type)

    # real graph inputs are those not backed by an initializer (older IR
    # versions list weights under inputs as well)
    real_inputs = [vi for vi in graph.inputs if vi.name not in graph.initializers]
    if len(real_inputs) != 1:
        raise ParseError(f"model must have exactly one input, found {len(real_inputs)}")
    if len(graph.outputs) != 1:
        raise ParseError(f"model must have exactly one output, found {len(graph.outputs)}")
    input_vi = real_inputs[0]
    output_vi = graph.outputs[0]
    if input_vi.elem_type != onnxio.DT_FLOAT:
        raise ParseError(f"model input must be float32, got data type {input_vi.elem_type}")
    input_shape = _norm_dims(input_vi.dims)
    if not input_shape:
        raise ParseError("model input shape is missing")

    for name, arr in graph.initializers.items():
        if arr.dtype != np.float32:
            raise ParseError(f"initializer {name!r} must be float32, got {arr.dtype}")

    ordered = toposort(graph, input_vi.name)
    shapes = infer_shapes(graph, ordered, input_vi.name, input_shape)

    if ordered:
        produced = {o for n in ordered for o in n.outputs}
        if output_vi.name not in produced:
            raise ShapeMismatch(output_vi.name, "declared output is not produced by any node")
        out_name = output_vi.name
        out_shape = shapes[out_name]
        if len(out_shape) != 2 or out_shape[1] != NUM_CLASSES:
            raise ShapeMismatch(out_name, f"output shape {out_shape} is not (N, {NUM_CLASSES})")
        declared = _norm_dims(output_vi.dims)
        if declared and len(declared) == len(out_shape):
            for d, s in zip(declared, out_shape):
                if d is not None and s is not None and d != s:
                    raise ShapeMismatch(out_name, f"declared output {declared} != inferred {out_shape}")
    else:
        raise ParseError("model graph has no nodes")

    class_order = _parse_class_order(model.metadata)
    preproc_raw = model.metadata.get("preproc")
    if not preproc_raw:
        raise MissingMetadata("model metadata lacks preproc")
    preproc = PreprocSpec.from_json(preproc_raw)

    for key in ("total_params", "trainable_params"):
        if key not in model.metadata:
            raise MissingMetadata(f"model metadata lacks {key}")
    total = count_parameters(graph)
    try:
        declared_total = int(model.metadata["total_params"])
        trainable = int(model.metadata["trainable_params"])
    except ValueError as exc:
        raise MissingMetadata(f"parameter count metadata is not an integer: {exc}") from exc
    if declared_total != total:
        raise MissingMetadata(
            f"total_params metadata says {declared_total} but the file stores {total}")
    if not 0 <= trainable <= total:
        raise MissingMetadata(f"trainable_params {trainable} outside [0, {total}]")

    return ModelGraph(
        nodes=ordered,
        initializers=graph.initializers,
        input_name=input_vi.name,
        input_shape=input_shape,
        output_name=output_vi.name,
        class_order=class_order,
        preproc=preproc,
        total_params=total,
        trainable_params=trainable,
        shapes=shapes,
        metadata=dict(model.metadata),
        producer_name=model.producer_name,
        opset=model.opset,
    )


def load_model(path: str) -> ModelGraph:
    """Read and validate a model file."""
    return validate_model(onnxio.read_model(path))


def model_info(model: ModelGraph) -> dict:
    """Structural report: parameter counts, per-node shapes, class order."""
    return {
        "total_params": model.total_params,
        "trainable_params": model.trainable_params,
        "class_order": [c.canonical_id for c in model.class_order],
        "input": {"name": model.input_name, "shape": list(model.input_shape)},
        "output": {"name": model.output_name,
                   "shape": list(model.shapes.get(model.output_name, ()))},
        "nodes": [
            {
                "name": n.name or n.op_type,
                "op_type": n.op_type,
                "output_shape": list(model.shapes.get(n.outputs[0], ())),
            }
            for n in model.nodes
        ],
        "opset": model.opset,
        "producer": model.producer_name,
    }
