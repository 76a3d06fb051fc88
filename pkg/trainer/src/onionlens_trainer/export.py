"""Exporters: model graphs, embedding tables, prototype seed lists.

The model walker maps torch modules onto the nine-operator interchange
subset. Anything outside that subset fails loudly with UnsupportedLayer
rather than exporting a file the scanner would reject later.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
import yaml
from torch import nn

from . import onnx_out as wire
from .errors import MissingSeedTerm, TrainerError, UnsupportedLayer
from .models import CustomCnn, ModelBundle, TransferModel
from .train import MEAN, SCALE


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        return int(v[0]), int(v[1])
    return int(v), int(v)


def _is_bottleneck(m: nn.Module) -> bool:
    try:
        from torchvision.models.resnet import Bottleneck
    except ImportError:  # pragma: no cover - torchvision is a hard dep
        return False
    return isinstance(m, Bottleneck)


class _Builder:
    """Accumulates nodes and weight tensors while tracking how many
    floats actually land in the file."""

    def __init__(self):
        self.nodes: list[bytes] = []
        self.inits: list[bytes] = []
        self.stored_params = 0
        self._op_seq: dict[str, int] = {}
        self._tensor_seq = 0

    def fresh(self) -> str:
        self._tensor_seq += 1
        return f"t{self._tensor_seq}"

    def op_name(self, op: str) -> str:
        n = self._op_seq.get(op, 0)
        self._op_seq[op] = n + 1
        return f"{op.lower()}_{n}"

    def weight(self, name: str, value: torch.Tensor | np.ndarray) -> str:
        if isinstance(value, torch.Tensor):
            value = value.detach().cpu().numpy()
        arr = np.ascontiguousarray(value, dtype=np.float32)
        self.inits.append(wire.tensor(name, arr))
        self.stored_params += arr.size
        return name

    def node(self, op: str, inputs: list[str], outputs: list[str],
             attrs: dict | None = None) -> None:
        self.nodes.append(wire.node(op, inputs, outputs,
                                    name=self.op_name(op), attrs=attrs))


def _conv(b: _Builder, m: nn.Conv2d, x: str) -> str:
    if m.groups != 1:
        raise UnsupportedLayer(f"Conv2d groups={m.groups}")
    if _pair(m.dilation) != (1, 1):
        raise UnsupportedLayer(f"Conv2d dilation={m.dilation}")
    if not isinstance(m.padding, (int, tuple, list)):
        raise UnsupportedLayer(f"Conv2d padding={m.padding!r}")
    name = b.op_name("Conv")
    w = b.weight(f"{name}.weight", m.weight)
    bias = m.bias if m.bias is not None else torch.zeros(m.out_channels)
    bias_name = b.weight(f"{name}.bias", bias)
    kh, kw = _pair(m.kernel_size)
    sh, sw = _pair(m.stride)
    ph, pw = _pair(m.padding)
    out = b.fresh()
    b.nodes.append(wire.node("Conv", [x, w, bias_name], [out], name=name, attrs={
        "kernel_shape": [kh, kw], "strides": [sh, sw],
        "pads": [ph, pw, ph, pw], "group": 1}))
    return out


def _bn(b: _Builder, m: nn.BatchNorm2d, x: str) -> str:
    if m.running_mean is None or m.running_var is None:
        raise UnsupportedLayer("BatchNorm2d without running statistics")
    name = b.op_name("BatchNormalization")
    c = m.num_features
    scale = m.weight if m.weight is not None else torch.ones(c)
    shift = m.bias if m.bias is not None else torch.zeros(c)
    inputs = [x,
              b.weight(f"{name}.scale", scale),
              b.weight(f"{name}.shift", shift),
              b.weight(f"{name}.mean", m.running_mean),
              b.weight(f"{name}.var", m.running_var)]
    out = b.fresh()
    b.nodes.append(wire.node("BatchNormalization", inputs, [out], name=name,
                             attrs={"epsilon": float(m.eps)}))
    return out


def _relu(b: _Builder, x: str) -> str:
    out = b.fresh()
    b.node("Relu", [x], [out])
    return out


def _maxpool(b: _Builder, m: nn.MaxPool2d, x: str) -> str:
    if m.ceil_mode:
        raise UnsupportedLayer("MaxPool2d ceil_mode")
    if _pair(m.dilation) != (1, 1):
        raise UnsupportedLayer(f"MaxPool2d dilation={m.dilation}")
    kh, kw = _pair(m.kernel_size)
    sh, sw = _pair(m.stride if m.stride is not None else m.kernel_size)
    ph, pw = _pair(m.padding)
    out = b.fresh()
    b.node("MaxPool", [x], [out], attrs={
        "kernel_shape": [kh, kw], "strides": [sh, sw],
        "pads": [ph, pw, ph, pw]})
    return out


def _gap(b: _Builder, m: nn.AdaptiveAvgPool2d, x: str) -> str:
    if _pair(m.output_size) != (1, 1):
        raise UnsupportedLayer(f"AdaptiveAvgPool2d output_size={m.output_size}")
    out = b.fresh()
    b.node("GlobalAveragePool", [x], [out])
    return out


def _flatten(b: _Builder, x: str) -> str:
    out = b.fresh()
    b.node("Flatten", [x], [out], attrs={"axis": 1})
    return out


def _linear(b: _Builder, m: nn.Linear, x: str) -> str:
    name = b.op_name("Gemm")
    w = b.weight(f"{name}.weight", m.weight)  # (out, in), hence transB
    inputs = [x, w]
    if m.bias is not None:
        inputs.append(b.weight(f"{name}.bias", m.bias))
    out = b.fresh()
    b.nodes.append(wire.node("Gemm", inputs, [out], name=name,
                             attrs={"transB": 1}))
    return out


def _softmax(b: _Builder, m: nn.Softmax, x: str) -> str:
    if m.dim is None:
        raise UnsupportedLayer("Softmax without an explicit dim")
    out = b.fresh()
    b.node("Softmax", [x], [out], attrs={"axis": int(m.dim)})
    return out


def _bottleneck(b: _Builder, m: nn.Module, x: str) -> str:
    y = _relu(b, _bn(b, m.bn1, _conv(b, m.conv1, x)))
    y = _relu(b, _bn(b, m.bn2, _conv(b, m.conv2, y)))
    y = _bn(b, m.bn3, _conv(b, m.conv3, y))
    shortcut = x
    if m.downsample is not None:
        for child in m.downsample:
            if isinstance(child, nn.Conv2d):
                shortcut = _conv(b, child, shortcut)
            elif isinstance(child, nn.BatchNorm2d):
                shortcut = _bn(b, child, shortcut)
            else:
                raise UnsupportedLayer(
                    f"residual shortcut {type(child).__name__}")
    out = b.fresh()
    b.node("Add", [y, shortcut], [out])
    return _relu(b, out)


def _emit(b: _Builder, m: nn.Module, x: str, spatial: bool) -> tuple[str, bool]:
    if isinstance(m, nn.Sequential):
        for child in m:
            x, spatial = _emit(b, child, x, spatial)
        return x, spatial
    if isinstance(m, (nn.Identity, nn.Dropout)):
        return x, spatial
    if isinstance(m, nn.Conv2d):
        return _conv(b, m, x), True
    if isinstance(m, nn.BatchNorm2d):
        return _bn(b, m, x), spatial
    if isinstance(m, nn.ReLU):
        return _relu(b, x), spatial
    if isinstance(m, nn.MaxPool2d):
        return _maxpool(b, m, x), spatial
    if isinstance(m, nn.AdaptiveAvgPool2d):
        return _gap(b, m, x), True
    if isinstance(m, nn.Flatten):
        if m.start_dim != 1 or m.end_dim != -1:
            raise UnsupportedLayer(
                f"Flatten start_dim={m.start_dim} end_dim={m.end_dim}")
        return _flatten(b, x), False
    if isinstance(m, nn.Linear):
        if spatial:  # bridge a 4-D feature map into the dense head
            x = _flatten(b, x)
        return _linear(b, m, x), False
    if isinstance(m, nn.Softmax):
        return _softmax(b, m, x), spatial
    if _is_bottleneck(m):
        return _bottleneck(b, m, x), True
    raise UnsupportedLayer(type(m).__name__)


def _plan(module: nn.Module):
    """Atomic export order for the two supported architectures."""
    if isinstance(module, CustomCnn):
        yield module.features
        yield module.classifier
        yield module.softmax
    elif isinstance(module, TransferModel):
        bb = module.backbone
        yield from (bb.conv1, bb.bn1, bb.relu, bb.maxpool,
                    bb.layer1, bb.layer2, bb.layer3, bb.layer4, bb.avgpool)
        yield module.head
        yield module.softmax
    else:
        yield module


def export_model(bundle: ModelBundle, class_order: tuple[str, ...],
                 path: str | Path, mean=MEAN, scale=SCALE) -> Path:
    """Serialize a trained bundle to the interchange file at `path`."""
    b = _Builder()
    x, spatial = "input", True
    for part in _plan(bundle.module):
        x, spatial = _emit(b, part, x, spatial)

    if b.stored_params != bundle.total_params:
        raise TrainerError(
            f"exported {b.stored_params} parameters, bundle declares "
            f"{bundle.total_params}")

    size = bundle.input_size
    graph = wire.graph(
        b.nodes, b.inits,
        inputs=[wire.value_info("input", ["N", 3, size, size])],
        outputs=[wire.value_info(x, ["N", len(class_order)])])
    preproc = json.dumps({"size": size, "mean": list(mean),
                          "scale": list(scale), "resize": "bilinear"},
                         sort_keys=True)
    blob = wire.model(graph, metadata={
        "class_order": ",".join(class_order),
        "preproc": preproc,
        "total_params": str(bundle.total_params),
        "trainable_params": str(bundle.trainable_params),
    })
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    return path


# ---------------------------------------------------------------------------
# NLP artifacts
# ---------------------------------------------------------------------------

def load_vocab(path: str | Path) -> dict[str, np.ndarray]:
    """Read a text embedding table back into a word -> vector mapping."""
    vocab: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise TrainerError(f"{path}:{lineno}: ragged vector line")
            word = parts[0].lower()
            vocab.setdefault(word, np.asarray([float(v) for v in parts[1:]],
                                              dtype=np.float64))
    if not vocab:
        raise TrainerError(f"{path}: empty vocabulary")
    return vocab


def export_embeddings(vocab: dict[str, np.ndarray], path: str | Path) -> Path:
    """Write a text table, one `token v1 .. vd` line per word."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in vocab.items():
            comps = " ".join(f"{float(v):.6f}" for v in np.asarray(vec).ravel())
            fh.write(f"{word} {comps}\n")
    return path


def _embed_term(term: str, vocab: dict[str, np.ndarray], dim: int) -> np.ndarray:
    vecs = [vocab[t] for t in term.split() if t in vocab]
    if not vecs:
        return np.zeros(dim, dtype=np.float64)
    mean = np.mean(np.asarray(vecs, dtype=np.float64), axis=0)
    norm = float(np.linalg.norm(mean))
    return mean / norm if norm else np.zeros(dim, dtype=np.float64)


def compute_prototypes(seeds: dict[str, list[str]],
                       vocab: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Category prototype vectors, matching what the scanner derives from
    the same seed file: normalized mean of the normalized per-seed means."""
    dim = len(next(iter(vocab.values())))
    out = {}
    for category, terms in seeds.items():
        vecs = [v for v in (_embed_term(t.strip().lower(), vocab, dim)
                            for t in terms) if v.any()]
        if not vecs:
            raise MissingSeedTerm(
                f"no seed of {category!r} is covered by the vocabulary")
        mean = np.mean(np.asarray(vecs), axis=0)
        norm = float(np.linalg.norm(mean))
        if norm == 0.0:
            raise MissingSeedTerm(f"seeds of {category!r} cancel out")
        out[category] = mean / norm
    return out


def export_prototypes(seeds: dict[str, list[str]],
                      vocab: dict[str, np.ndarray], path: str | Path) -> Path:
    """Validate seed coverage against `vocab`, then write the YAML seed
    lists the scanner builds its prototypes from."""
    compute_prototypes(seeds, vocab)  # raises MissingSeedTerm on gaps
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({k: list(v) for k, v in seeds.items()}, fh,
                       sort_keys=True)
    return path
