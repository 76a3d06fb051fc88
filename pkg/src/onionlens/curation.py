"""Image decoding, perceptual hashing, deduplication and dataset manifests.

The dedup fingerprint is a 64-bit difference hash: BT.601 luma, bilinear
resize to 9x8, one bit per adjacent-column brightness comparison. Greedy
first-wins deduplication drops a record when its hash lies within the
threshold Hamming distance of any already-kept record.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import SchemaError
from .kernels import popcount64, resize_bilinear
from .taxonomy import CATEGORIES, Category, resolve_category

MANIFEST_SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")

# BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass
class DecodedImage:
    width: int
    height: int
    channels: int
    pixels: np.ndarray  # uint8, shape (height, width, channels)

    def __post_init__(self):
        expected = (self.height, self.width, self.channels)
        if self.pixels.shape != expected:
            raise ValueError(f"pixel buffer shape {self.pixels.shape} != {expected}")
        if self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be uint8")
        if self.width < 1 or self.height < 1:
            raise ValueError("empty image")
        if self.channels not in (1, 3):
            raise ValueError(f"unsupported channel count {self.channels}")


@dataclass
class Unusable:
    reason: str


@dataclass
class ImageRecord:
    source_url: str
    data: bytes
    content_type: str | None = None
    image: DecodedImage | None = None
    unusable: str | None = None
    dhash: int | None = None
    label: Category | None = None
    kept: bool = False

    @property
    def ok(self) -> bool:
        return self.image is not None

    def decode(self, min_side: int = 64) -> "ImageRecord":
        """Attach decode result and hash in place; returns self."""
        result = decode_and_validate(self.data, min_side=min_side)
        if isinstance(result, Unusable):
            self.unusable = result.reason
            self.image = None
            self.dhash = None
        else:
            self.image = result
            self.unusable = None
            self.dhash = dhash64(result)
        return self


def decode_and_validate(data: bytes, min_side: int = 64) -> DecodedImage | Unusable:
    """Decode PNG/JPEG/GIF (first frame)/WebP bytes into 8-bit pixels.

    Returns Unusable("decode_failed") when the bytes cannot be decoded and
    Unusable("too_small") when min(width, height) < min_side. Unusable is
    a value, not an error.
    """
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            if img.mode == "L":
                arr = np.asarray(img, dtype=np.uint8)[:, :, None]
            else:
                arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError):
        return Unusable("decode_failed")
    h, w = arr.shape[0], arr.shape[1]
    if h < 1 or w < 1:
        return Unusable("decode_failed")
    if min(h, w) < min_side:
        return Unusable("too_small")
    return DecodedImage(width=w, height=h, channels=arr.shape[2], pixels=arr)


def luma(img: DecodedImage) -> np.ndarray:
    """BT.601 grayscale plane in float64, shape (height, width)."""
    px = img.pixels.astype(np.float64)
    if img.channels == 1:
        return px[:, :, 0]
    return px[:, :, 0] * _LUMA[0] + px[:, :, 1] * _LUMA[1] + px[:, :, 2] * _LUMA[2]


def dhash64(img: DecodedImage) -> int:
    """64-bit difference hash: 9x8 luma grid, bit r*8+c set iff
    grid[r, c] > grid[r, c+1] (strict)."""
    grid = resize_bilinear(luma(img), 8, 9)  # 8 rows, 9 columns
    h = 0
    for r in range(8):
        for c in range(8):
            if grid[r, c] > grid[r, c + 1]:
                h |= 1 << (r * 8 + c)
    return h


def hamming(a: int, b: int) -> int:
    """Number of differing bits between two 64-bit hashes."""
    return popcount64(a ^ b)


def dedupe(records: list[ImageRecord], threshold: int) -> tuple[list[ImageRecord], list[ImageRecord]]:
    """Greedy first-wins pass in input order.

    A record is dropped iff its hash is within `threshold` Hamming bits of
    any already-kept record. All records must be decoded (hash present).
    """
    if not 0 <= threshold <= 64:
        raise ValueError(f"threshold must be in [0, 64], got {threshold}")
    kept: list[ImageRecord] = []
    dropped: list[ImageRecord] = []
    for rec in records:
        if rec.dhash is None:
            raise ValueError(f"record {rec.source_url!r} is not decoded/hashed")
        if any(hamming(rec.dhash, k.dhash) <= threshold for k in kept):
            rec.kept = False
            dropped.append(rec)
        else:
            rec.kept = True
            kept.append(rec)
    return kept, dropped


# ---------------------------------------------------------------------------
# dataset manifest (JSON Lines)
# ---------------------------------------------------------------------------

_ENTRY_KEYS = {"path", "label", "dhash", "split", "source_url"}


@dataclass
class ManifestEntry:
    path: str
    label: Category
    dhash: int
    split: str = "train"
    source_url: str = ""

    def __post_init__(self):
        if self.split not in SPLITS:
            raise SchemaError(f"bad split {self.split!r} for {self.path}")


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        out = {c.canonical_id: 0 for c in CATEGORIES}
        for e in self.entries:
            out[e.label.canonical_id] += 1
        return out

    def __len__(self) -> int:
        return len(self.entries)


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    """Write JSON Lines: a header with schema version and counts, then one
    entry per line. Paths must be unique."""
    seen = set()
    for e in manifest.entries:
        if e.path in seen:
            raise SchemaError(f"duplicate manifest path {e.path!r}")
        seen.add(e.path)
    header = {"schema_version": MANIFEST_SCHEMA_VERSION, "counts": manifest.counts()}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for e in manifest.entries:
            fh.write(json.dumps({
                "path": e.path,
                "label": e.label.canonical_id,
                "dhash": f"{e.dhash:016x}",
                "split": e.split,
                "source_url": e.source_url,
            }, sort_keys=True) + "\n")


def load_manifest(path: str) -> DatasetManifest:
    """Load and validate a manifest; counts are recomputed and must match
    the stored header. Labels resolve through the category aliases."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in (l.strip() for l in fh) if ln]
    if not lines:
        raise SchemaError(f"manifest {path} has no header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest header is not JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise SchemaError(f"unsupported manifest header: {header!r}")
    entries = []
    seen_paths = set()
    for i, line in enumerate(lines[1:], start=2):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {i}: not JSON: {exc}") from exc
        unknown = set(raw) - _ENTRY_KEYS
        if unknown:
            raise SchemaError(f"line {i}: unknown fields {sorted(unknown)}")
        missing = _ENTRY_KEYS - set(raw)
        if missing:
            raise SchemaError(f"line {i}: missing fields {sorted(missing)}")
        try:
            label = resolve_category(raw["label"])
        except Exception as exc:
            raise SchemaError(f"line {i}: {exc}") from exc
        try:
            dhash = int(raw["dhash"], 16)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {i}: bad dhash {raw['dhash']!r}") from exc
        if raw["path"] in seen_paths:
            raise SchemaError(f"line {i}: duplicate path {raw['path']!r}")
        seen_paths.add(raw["path"])
        if raw["split"] not in SPLITS:
            raise SchemaError(f"line {i}: bad split {raw['split']!r}")
        entries.append(ManifestEntry(path=raw["path"], label=label, dhash=dhash,
                                     split=raw["split"], source_url=raw["source_url"]))
    manifest = DatasetManifest(entries)
    stored = header.get("counts", {})
    recomputed = manifest.counts()
    if stored != recomputed:
        raise SchemaError(f"stored counts {stored} != recomputed {recomputed}")
    return manifest
