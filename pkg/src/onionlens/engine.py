"""Forward pass and image classification.

Evaluates a validated ModelGraph on preprocessed image tensors using the
kernels module, then maps the output probabilities through the model's
class order into canonical taxonomy order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .curation import DecodedImage
from .errors import NonFiniteValue, ShapeMismatch
from .model import ModelGraph, PreprocSpec
from .taxonomy import CategoryScores, Category


@dataclass(frozen=True)
class Classification:
    """Result of running one image through the model."""

    scores: CategoryScores
    top: Category
    confidence: float


def preprocess(img: DecodedImage, spec: PreprocSpec) -> np.ndarray:
    """Image -> float32 tensor of shape (1, 3, size, size).

    Grayscale input is replicated across the three channels. Pixels are
    resized first (bilinear, on float values), then normalized with
    x -> (x/255 - mean)/scale per channel.
    """
    pixels = img.pixels
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    if pixels.shape[2] == 1:
        pixels = np.repeat(pixels, 3, axis=2)
    x = pixels.astype(np.float32)
    if x.shape[0] != spec.size or x.shape[1] != spec.size:
        x = kernels.resize_bilinear(x, spec.size, spec.size)
    x = x / np.float32(255.0)
    mean = np.asarray(spec.mean, dtype=np.float32)
    scale = np.asarray(spec.scale, dtype=np.float32)
    x = (x - mean) / scale
    return np.ascontiguousarray(x.transpose(2, 0, 1))[None, :, :, :]


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteValue(name)


def _eval_node(node, values: dict[str, np.ndarray], weights) -> np.ndarray:
    op = node.op_type

    def inp(i: int) -> np.ndarray:
        name = node.inputs[i]
        return weights[name] if name in weights else values[name]

    if op == "Conv":
        x, w = inp(0), inp(1)
        b = inp(2) if len(node.inputs) > 2 else None
        strides = node.attrs.get("strides", [1, 1])
        pads = node.attrs.get("pads", [0, 0, 0, 0])
        return kernels.conv2d(x, w, b, tuple(strides), tuple(pads))
    if op == "BatchNormalization":
        eps = float(node.attrs.get("epsilon", 1e-5))
        return kernels.batchnorm(inp(0), inp(1), inp(2), inp(3), inp(4), eps)
    if op == "Relu":
        return kernels.relu(inp(0))
    if op == "MaxPool":
        ks = node.attrs["kernel_shape"]
        strides = node.attrs.get("strides", [1, 1])
        pads = node.attrs.get("pads", [0, 0, 0, 0])
        return kernels.maxpool2d(inp(0), tuple(ks), tuple(strides), tuple(pads))
    if op == "GlobalAveragePool":
        return kernels.global_avg_pool(inp(0))
    if op == "Flatten":
        x = inp(0)
        axis = node.attrs.get("axis", 1)
        axis = axis % x.ndim if axis != x.ndim else x.ndim
        lead = int(np.prod(x.shape[:axis])) if axis else 1
        return np.ascontiguousarray(x.reshape(lead, -1))
    if op == "Gemm":
        x, w = inp(0), inp(1)
        b = inp(2) if len(node.inputs) > 2 else None
        if not node.attrs.get("transB", 0):
            w = np.ascontiguousarray(w.T)
        return kernels.dense(x, w, b)
    if op == "Add":
        return inp(0) + inp(1)
    if op == "Softmax":
        return kernels.softmax(inp(0), axis=node.attrs.get("axis", -1))
    raise ShapeMismatch(node.name or op, f"unexpected operator {op}")  # pragma: no cover


def forward(model: ModelGraph, batch: np.ndarray) -> np.ndarray:
    """Run the graph on a batch; returns the model output (N x 5)."""
    batch = np.asarray(batch, dtype=np.float32)
    expect = model.input_shape
    if batch.ndim != len(expect):
        raise ShapeMismatch(model.input_name,
                            f"batch rank {batch.ndim} != model input rank {len(expect)}")
    for got, want in zip(batch.shape[1:], expect[1:]):
        if want is not None and got != want:
            raise ShapeMismatch(model.input_name,
                                f"batch shape {batch.shape} != model input {expect}")
    _check_finite(model.input_name, batch)
    values: dict[str, np.ndarray] = {model.input_name: batch}
    for node in model.nodes:
        out = _eval_node(node, values, model.initializers)
        _check_finite(node.name or node.op_type, out)
        values[node.outputs[0]] = out
    return values[model.output_name]


def classify(model: ModelGraph, img: DecodedImage) -> Classification:
    """Preprocess, run forward, and map scores into canonical order."""
    probs = forward(model, preprocess(img, model.preproc))[0]
    canonical = [0.0] * len(model.class_order)
    for pos, cat in enumerate(model.class_order):
        canonical[cat.index] = float(probs[pos])
    scores = CategoryScores(tuple(canonical), normalized=True)
    top = scores.argmax()
    return Classification(scores=scores, top=top, confidence=scores.scores[top.index])
