"""Synthetic five-class proxy dataset.

Real market screenshots cannot be collected here, so training and
augmentation are exercised on generated images with strong per-class
visual identities: a base palette plus a characteristic pattern, both
jittered per image. The classes are deliberately easy to separate; the
point is to exercise the pipeline, not to challenge the model.
"""

from __future__ import annotations

import pathlib

import numpy as np
from PIL import Image

from . import manifest as mf
from .dhash import dhash64

# per class: base RGB and a pattern id
_STYLE = {
    "drugs": ((40, 140, 60), "blobs"),
    "weapons": ((70, 70, 80), "diag"),
    "bank_cards": ((40, 80, 180), "bands"),
    "identity_documents": ((200, 180, 140), "frame"),
    "illegal_currencies": ((170, 170, 60), "checker"),
}


def _pattern(rng: np.random.Generator, kind: str, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == "blobs":
        mask = np.zeros((size, size))
        for _ in range(4):
            cx, cy = rng.uniform(0, size, 2)
            r = rng.uniform(size * 0.1, size * 0.25)
            mask += ((xx - cx) ** 2 + (yy - cy) ** 2 < r * r)
        return np.clip(mask, 0, 1)
    if kind == "diag":
        period = rng.integers(6, 12)
        return ((xx + yy) // period) % 2
    if kind == "bands":
        period = rng.integers(5, 10)
        return (yy // period) % 2
    if kind == "frame":
        t = int(rng.integers(2, max(3, size // 8)))
        mask = np.zeros((size, size))
        mask[t:-t, t:-t] = 1.0
        mask[2 * t:-2 * t, 2 * t:-2 * t] = 0.0
        return mask
    if kind == "checker":
        period = rng.integers(4, 9)
        return ((xx // period) + (yy // period)) % 2
    raise ValueError(kind)


def make_image(label: str, rng: np.random.Generator, size: int) -> Image.Image:
    base, kind = _STYLE[label]
    color = np.clip(np.asarray(base, dtype=np.float64)
                    + rng.normal(0, 12, 3), 0, 255)
    img = np.ones((size, size, 3)) * color
    mask = _pattern(rng, kind, size)[:, :, None]
    accent = np.clip(color * rng.uniform(0.35, 0.6), 0, 255)
    img = img * (1 - mask) + accent * mask
    img += rng.normal(0, 6, img.shape)
    return Image.fromarray(np.clip(img, 0, 255).astype(np.uint8), "RGB")


def generate(counts: dict[str, int], out_dir: str, size: int = 64,
             seed: int = 0, split: tuple[float, float] = (0.7, 0.15)) -> mf.Manifest:
    """Write one PNG per entry under out_dir/<label>/ and return the
    manifest (also saved as out_dir/manifest.jsonl). Splits are
    stratified train/val/test at the given fractions, seeded."""
    root = pathlib.Path(out_dir)
    rng = np.random.default_rng(seed)
    entries = []
    for label in mf.CLASS_ORDER:
        n = counts.get(label, 0)
        if not n:
            continue
        (root / label).mkdir(parents=True, exist_ok=True)
        n_train = round(n * split[0])
        n_val = round(n * split[1])
        order = rng.permutation(n)
        for i in range(n):
            img = make_image(label, rng, size)
            rel = f"{label}/img_{i:04d}.png"
            img.save(root / rel)
            pos = int(order[i])
            part = ("train" if pos < n_train
                    else "val" if pos < n_train + n_val else "test")
            entries.append(mf.Entry(path=rel, label=label, dhash=dhash64(img),
                                    split=part))
    out = mf.Manifest(entries)
    mf.save(out, str(root / "manifest.jsonl"))
    return out
