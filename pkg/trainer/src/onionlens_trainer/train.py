"""Training loops for both model kinds.

The transfer path never backpropagates through the trunk: trunk features
are computed once per run and the head is fit on the cached tensors,
which keeps a 20-epoch desk run in the seconds range.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch import nn

from .errors import TrainerError, TrainingDiverged
from .manifest import Manifest
from .models import ModelBundle

MEAN = (0.5, 0.5, 0.5)
SCALE = (0.5, 0.5, 0.5)


@dataclass
class TrainConfig:
    epochs: int = 20
    lr: float = 0.001
    momentum: float = 0.9
    batch_size: int = 32
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.epochs <= 0:
            raise TrainerError("epochs must be positive")
        if self.lr <= 0:
            raise TrainerError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise TrainerError("momentum must be in [0, 1)")
        if self.batch_size <= 0:
            raise TrainerError("batch_size must be positive")
        return self


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainResult:
    history: list[EpochStats] = field(default_factory=list)

    @property
    def final_val_acc(self) -> float:
        return self.history[-1].val_acc if self.history else 0.0


def _class_index(label: str, class_order: tuple[str, ...]) -> int:
    return class_order.index(label)


def load_image_tensor(path: Path, size: int) -> np.ndarray:
    """One image to preprocessed (3, size, size) float32, matching what
    the scanner applies at inference time."""
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
        arr = np.asarray(rgb, dtype=np.float32) / 255.0
    mean = np.asarray(MEAN, dtype=np.float32)
    scale = np.asarray(SCALE, dtype=np.float32)
    arr = (arr - mean) / scale
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def _ensure_val_split(manifest: Manifest, seed: int) -> Manifest:
    """Re-split 70/15/15 per class when the manifest carries no val rows."""
    if any(e.split == "val" for e in manifest.entries):
        return manifest
    rng = np.random.default_rng(seed)
    out = []
    for label, group in sorted(manifest.by_label().items()):
        order = rng.permutation(len(group))
        n = len(group)
        n_train = int(round(n * 0.7))
        n_val = int(round(n * 0.15))
        for rank, idx in enumerate(order):
            e = group[idx]
            if rank < n_train:
                split = "train"
            elif rank < n_train + n_val:
                split = "val"
            else:
                split = "test"
            out.append(type(e)(path=e.path, label=e.label, dhash=e.dhash,
                               split=split, source_url=e.source_url))
    return Manifest(entries=out)


def load_split_arrays(manifest: Manifest, root: Path, size: int,
                      class_order: tuple[str, ...],
                      split: str) -> tuple[torch.Tensor, torch.Tensor]:
    xs, ys = [], []
    for entry in manifest.entries:
        if entry.split != split:
            continue
        xs.append(load_image_tensor(root / entry.path, size))
        ys.append(_class_index(entry.label, class_order))
    if not xs:
        raise TrainerError(f"manifest has no '{split}' entries")
    return torch.from_numpy(np.stack(xs)), torch.tensor(ys, dtype=torch.long)


def _pass_stats(logits: torch.Tensor, y: torch.Tensor,
                loss_fn: nn.Module) -> tuple[float, float]:
    loss = loss_fn(logits, y).item()
    acc = (logits.argmax(dim=1) == y).float().mean().item()
    return loss, acc


def train(bundle: ModelBundle, manifest: Manifest, root: Path,
          cfg: TrainConfig, class_order: tuple[str, ...],
          out_dir: Path | None = None) -> TrainResult:
    cfg.validate()
    torch.manual_seed(cfg.seed)
    manifest = _ensure_val_split(manifest, cfg.seed)

    x_train, y_train = load_split_arrays(manifest, root, bundle.input_size,
                                         class_order, "train")
    x_val, y_val = load_split_arrays(manifest, root, bundle.input_size,
                                     class_order, "val")

    module = bundle.module
    loss_fn = nn.CrossEntropyLoss()

    if bundle.kind == "transfer":
        # one-time feature pass; afterwards only the head sees gradients
        with torch.no_grad():
            f_train = _in_chunks(module.features, x_train, cfg.batch_size)
            f_val = _in_chunks(module.features, x_val, cfg.batch_size)
        net: nn.Module = module.head
        train_in, val_in = f_train, f_val
    else:
        net = module
        train_in, val_in = x_train, x_val

    params = [p for p in net.parameters() if p.requires_grad]
    opt = torch.optim.SGD(params, lr=cfg.lr, momentum=cfg.momentum)
    gen = torch.Generator().manual_seed(cfg.seed)

    result = TrainResult()
    for epoch in range(1, cfg.epochs + 1):
        net.train()
        perm = torch.randperm(len(train_in), generator=gen)
        running, seen = 0.0, 0
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            opt.zero_grad()
            out = _apply(net, bundle.kind, train_in[idx])
            loss = loss_fn(out, y_train[idx])
            if not math.isfinite(loss.item()):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            loss.backward()
            opt.step()
            running += loss.item() * len(idx)
            seen += len(idx)

        net.eval()
        with torch.no_grad():
            tr_loss, tr_acc = _pass_stats(
                _apply(net, bundle.kind, train_in), y_train, loss_fn)
            va_loss, va_acc = _pass_stats(
                _apply(net, bundle.kind, val_in), y_val, loss_fn)
        if not (math.isfinite(tr_loss) and math.isfinite(va_loss)):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        result.history.append(EpochStats(epoch, tr_loss, tr_acc, va_loss, va_acc))

    if out_dir is not None:
        write_history(result, out_dir)
    return result


def _apply(net: nn.Module, kind: str, x: torch.Tensor) -> torch.Tensor:
    return net(x) if kind == "transfer" else net.logits(x)


def _in_chunks(fn, x: torch.Tensor, batch: int) -> torch.Tensor:
    return torch.cat([fn(x[i:i + batch]) for i in range(0, len(x), batch)])


def write_history(result: TrainResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
        for s in result.history:
            writer.writerow([s.epoch, f"{s.train_loss:.6f}", f"{s.train_acc:.6f}",
                             f"{s.val_loss:.6f}", f"{s.val_acc:.6f}"])

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [s.epoch for s in result.history]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(epochs, [s.train_loss for s in result.history], label="train")
    ax_loss.plot(epochs, [s.val_loss for s in result.history], label="val")
    ax_loss.set_title("loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.legend()
    ax_acc.plot(epochs, [s.train_acc for s in result.history], label="train")
    ax_acc.plot(epochs, [s.val_acc for s in result.history], label="val")
    ax_acc.set_title("accuracy")
    ax_acc.set_xlabel("epoch")
    ax_acc.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "curves.png", dpi=100)
    plt.close(fig)
