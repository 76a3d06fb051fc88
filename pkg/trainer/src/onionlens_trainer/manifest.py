"""Dataset manifest I/O.

The JSON Lines layout is the interchange format of the scanning side: a
header line carrying the schema version and per-class counts, then one
entry per line with path, label, dhash, split, and source_url. This
module is a standalone implementation of that contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import SchemaError

SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")
CLASS_ORDER = ("drugs", "weapons", "bank_cards", "identity_documents",
               "illegal_currencies")

_ENTRY_KEYS = {"path", "label", "dhash", "split", "source_url"}


@dataclass
class Entry:
    path: str
    label: str
    dhash: int
    split: str = "train"
    source_url: str = ""

    def __post_init__(self):
        if self.label not in CLASS_ORDER:
            raise SchemaError(f"unknown label {self.label!r} for {self.path}")
        if self.split not in SPLITS:
            raise SchemaError(f"bad split {self.split!r} for {self.path}")


@dataclass
class Manifest:
    entries: list[Entry] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        out = {label: 0 for label in CLASS_ORDER}
        for e in self.entries:
            out[e.label] += 1
        return out

    def by_label(self) -> dict[str, list[Entry]]:
        out: dict[str, list[Entry]] = {label: [] for label in CLASS_ORDER}
        for e in self.entries:
            out[e.label].append(e)
        return out

    def __len__(self) -> int:
        return len(self.entries)


def save(manifest: Manifest, path: str) -> None:
    """Write the manifest; entry paths must be unique."""
    seen: set[str] = set()
    for e in manifest.entries:
        if e.path in seen:
            raise SchemaError(f"duplicate manifest path {e.path!r}")
        seen.add(e.path)
    header = {"schema_version": SCHEMA_VERSION, "counts": manifest.counts()}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for e in manifest.entries:
            fh.write(json.dumps({
                "path": e.path,
                "label": e.label,
                "dhash": f"{e.dhash:016x}",
                "split": e.split,
                "source_url": e.source_url,
            }, sort_keys=True) + "\n")


def load(path: str) -> Manifest:
    """Read and validate a manifest; header counts must match the body."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise SchemaError(f"manifest {path} has no header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest header is not JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported manifest header: {header!r}")

    entries = []
    for i, line in enumerate(lines[1:], start=2):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {i}: not JSON: {exc}") from exc
        if set(raw) != _ENTRY_KEYS:
            raise SchemaError(f"line {i}: fields must be {sorted(_ENTRY_KEYS)}")
        try:
            dhash = int(raw["dhash"], 16)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {i}: bad dhash {raw['dhash']!r}") from exc
        try:
            entries.append(Entry(path=raw["path"], label=raw["label"],
                                 dhash=dhash, split=raw["split"],
                                 source_url=raw["source_url"]))
        except SchemaError as exc:
            raise SchemaError(f"line {i}: {exc}") from exc

    manifest = Manifest(entries)
    if header.get("counts", {}) != manifest.counts():
        raise SchemaError(
            f"stored counts {header.get('counts')} != recomputed {manifest.counts()}")
    return manifest
