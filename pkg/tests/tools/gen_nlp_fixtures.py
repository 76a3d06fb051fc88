"""Generate the toy word-vector table used by the end-to-end fixtures.

16 dimensions: dims 0..4 are category axes (in canonical category
order), dims 5..15 carry per-word deterministic jitter so vectors are
not degenerate. Category words sit on their axis; neutral words live in
the jitter subspace only, far enough from every prototype to stay
unassigned at the default similarity floor.

    python3 tests/tools/gen_nlp_fixtures.py
"""

from __future__ import annotations

import pathlib
import zlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "nlp"

DIM = 16
N_AXES = 5

CATEGORY_WORDS = {
    0: ["drug", "drugs", "cannabis", "cocaine", "heroin", "pills", "mdma",
        "weed", "buds", "gram", "grams"],
    1: ["gun", "guns", "pistol", "rifle", "ammo", "weapon", "weapons"],
    2: ["card", "cards", "visa", "cvv", "dumps"],
    3: ["passport", "id", "license", "citizenship", "identity", "documents"],
    4: ["counterfeit", "bills", "banknote", "banknotes", "currency"],
}

NEUTRAL_WORDS = [
    "market", "buy", "sell", "premium", "shop", "vendor", "vendors", "order",
    "orders", "price", "prices", "quality", "pure", "shipping", "stealth",
    "escrow", "payment", "payments", "bitcoin", "accepted", "fast", "top",
    "trusted", "fresh", "bricks", "assorted", "harvest", "contact",
    "wholesale", "green", "leaf", "product", "products", "list", "gallery",
    "catalog", "options", "discreet", "delivery", "worldwide", "view",
    "close", "old", "home", "house", "icon", "onion", "tor",
]

SEED_JITTER = 0.05
NEUTRAL_SCALE = 0.5


def _jitter(word: str, scale: float) -> np.ndarray:
    rng = np.random.default_rng(zlib.crc32(word.encode("utf-8")))
    return rng.normal(0.0, 1.0, DIM - N_AXES) * scale


def build_vocab() -> dict[str, np.ndarray]:
    vocab: dict[str, np.ndarray] = {}
    for axis, words in CATEGORY_WORDS.items():
        for w in words:
            v = np.zeros(DIM)
            v[axis] = 1.0
            v[N_AXES:] = _jitter(w, SEED_JITTER)
            vocab[w] = v
    for w in NEUTRAL_WORDS:
        v = np.zeros(DIM)
        v[N_AXES:] = _jitter(w, NEUTRAL_SCALE)
        vocab[w] = v
    return vocab


def check_margins(vocab: dict[str, np.ndarray]) -> None:
    """Recompute prototypes the way the package defines them (normalized
    mean of normalized seed vectors, seeds from the packaged YAML) and
    require clear margins around the default similarity floor of 0.15."""
    import yaml

    seeds_file = (pathlib.Path(__file__).resolve().parents[2]
                  / "src" / "onionlens" / "data" / "prototypes.yaml")
    seeds = yaml.safe_load(seeds_file.read_text())

    def unit(v):
        n = np.linalg.norm(v)
        return v / n if n else v

    order = ["drugs", "weapons", "bank_cards", "identity_documents",
             "illegal_currencies"]
    protos = []
    for cat in order:
        vecs = [unit(vocab[w]) for w in seeds[cat] if w in vocab]
        assert vecs, f"no seeds of {cat} covered by the toy vocabulary"
        protos.append(unit(np.mean(vecs, axis=0)))

    worst_neutral = 0.0
    for w in NEUTRAL_WORDS:
        u = unit(vocab[w])
        worst_neutral = max(worst_neutral, max(float(u @ p) for p in protos))
    assert worst_neutral < 0.12, f"neutral word too close to a prototype: {worst_neutral}"

    worst_own, best_other = 1.0, 0.0
    for axis, words in CATEGORY_WORDS.items():
        for w in words:
            u = unit(vocab[w])
            sims = [float(u @ p) for p in protos]
            worst_own = min(worst_own, sims[axis])
            best_other = max(best_other, max(s for i, s in enumerate(sims) if i != axis))
    assert worst_own > 0.8, f"category word drifted off its prototype: {worst_own}"
    assert best_other < 0.12, f"category word leaking onto another prototype: {best_other}"
    print(f"margins ok: neutral<{worst_neutral:.3f}, own>{worst_own:.3f}, "
          f"cross<{best_other:.3f}")


def main() -> None:
    vocab = build_vocab()
    check_margins(vocab)
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / "vectors_toy.txt"
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in vocab.items():
            fh.write(word + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")
    print(f"wrote {path}: {len(vocab)} words, dim {DIM}")


if __name__ == "__main__":
    main()
