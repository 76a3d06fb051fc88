"""Dataset augmentation to per-class target counts.

Each augmented image is a randomly parameterized combination of five
ops: horizontal flip, rotation within +/-15 degrees, brightness within
+/-20%, zoom 0.9-1.1, and translation within +/-10% of the frame. The
continuous parameters are drawn from one seeded generator, so a run is
fully reproducible. Originals are always kept; sources are drawn with
replacement until each class reaches its target.
"""

from __future__ import annotations

import pathlib
import shutil
from dataclasses import dataclass, field

import numpy as np
import yaml
from PIL import Image, ImageEnhance, ImageOps

from . import manifest as mf
from .dhash import dhash64
from .errors import SchemaError, TargetBelowSource

# shipped example targets; weapons is exactly 9x its source count, the
# others are explicit numbers rather than a shared multiplier
DEFAULT_TARGETS = {
    "drugs": 1098,
    "weapons": 2871,
    "illegal_currencies": 945,
    "identity_documents": 531,
    "bank_cards": 936,
}


@dataclass
class AugmentationPlan:
    targets: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_TARGETS))
    rotation_deg: float = 15.0
    brightness: float = 0.2
    zoom: tuple[float, float] = (0.9, 1.1)
    translate: float = 0.1
    flip_prob: float = 0.5

    def validate(self) -> "AugmentationPlan":
        for label, n in self.targets.items():
            if label not in mf.CLASS_ORDER:
                raise SchemaError(f"unknown target label {label!r}")
            if not isinstance(n, int) or n <= 0:
                raise SchemaError(f"target for {label!r} must be a positive int")
        if self.zoom[0] > self.zoom[1]:
            raise SchemaError(f"zoom range {self.zoom} is inverted")
        return self


def load_plan(path: str) -> AugmentationPlan:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: plan must be a mapping")
    plan = AugmentationPlan()
    if "targets" in raw:
        plan.targets = {str(k): v for k, v in raw["targets"].items()}
    for knob in ("rotation_deg", "brightness", "translate", "flip_prob"):
        if knob in raw:
            setattr(plan, knob, float(raw[knob]))
    if "zoom" in raw:
        plan.zoom = tuple(float(v) for v in raw["zoom"])
    return plan.validate()


def _augment_one(img: Image.Image, plan: AugmentationPlan,
                 rng: np.random.Generator) -> Image.Image:
    if rng.random() < plan.flip_prob:
        img = ImageOps.mirror(img)
    angle = rng.uniform(-plan.rotation_deg, plan.rotation_deg)
    img = img.rotate(angle, resample=Image.Resampling.BILINEAR)
    factor = 1.0 + rng.uniform(-plan.brightness, plan.brightness)
    img = ImageEnhance.Brightness(img).enhance(factor)
    zoom = rng.uniform(*plan.zoom)
    w, h = img.size
    tx = rng.uniform(-plan.translate, plan.translate) * w
    ty = rng.uniform(-plan.translate, plan.translate) * h
    # affine maps output pixels to input: zoom about the center, then shift
    inv = 1.0 / zoom
    coeffs = (inv, 0.0, w / 2 - inv * (w / 2 + tx),
              0.0, inv, h / 2 - inv * (h / 2 + ty))
    return img.transform((w, h), Image.Transform.AFFINE, coeffs,
                         resample=Image.Resampling.BILINEAR)


def augment(source: mf.Manifest, plan: AugmentationPlan, src_root: str,
            out_root: str, seed: int = 0) -> mf.Manifest:
    """Copy the originals and generate augmented variants until each class
    reaches its target; classes without a target keep originals only.
    Augmented entries always land in the train split, labeled with their
    source path. Returns the combined manifest (not yet saved)."""
    plan.validate()
    src = pathlib.Path(src_root)
    out = pathlib.Path(out_root)
    rng = np.random.default_rng(seed)
    entries: list[mf.Entry] = []
    grouped = source.by_label()
    for label in mf.CLASS_ORDER:
        pool = grouped[label]
        if not pool:
            continue
        target = plan.targets.get(label, len(pool))
        if target < len(pool):
            raise TargetBelowSource(
                f"{label}: target {target} is below the {len(pool)} source images")
        (out / label).mkdir(parents=True, exist_ok=True)
        for e in pool:
            dest = out / label / pathlib.Path(e.path).name
            shutil.copyfile(src / e.path, dest)
            entries.append(mf.Entry(path=f"{label}/{dest.name}", label=label,
                                    dhash=e.dhash, split=e.split,
                                    source_url=e.source_url))
        for i in range(target - len(pool)):
            parent = pool[int(rng.integers(len(pool)))]
            with Image.open(src / parent.path) as fh:
                made = _augment_one(fh.convert("RGB"), plan, rng)
            rel = f"{label}/aug_{i:05d}.png"
            made.save(out / rel)
            entries.append(mf.Entry(path=rel, label=label, dhash=dhash64(made),
                                    split="train", source_url=parent.path))
    return mf.Manifest(entries)
