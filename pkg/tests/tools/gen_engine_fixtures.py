"""Generate frozen preprocessing fixtures for the inference engine.

Expected tensors come from the scalar float64 oracle.

    python3 tests/tools/gen_engine_fixtures.py
"""

from __future__ import annotations

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).parent))
import oracles  # noqa: E402

OUT = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "engine"

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_SCALE = (0.229, 0.224, 0.225)


def main() -> None:
    rng = np.random.default_rng(20240820)
    cases: dict[str, np.ndarray] = {}

    def put(prefix: str, pixels: np.ndarray, size: int, mean, scale) -> None:
        cases[f"{prefix}_pixels"] = pixels
        cases[f"{prefix}_size"] = np.asarray(size)
        cases[f"{prefix}_mean"] = np.asarray(mean, dtype=np.float64)
        cases[f"{prefix}_scale"] = np.asarray(scale, dtype=np.float64)
        cases[f"{prefix}_expected"] = oracles.ref_preprocess(pixels, size, mean, scale)

    # already at target size: no resample, just normalize and transpose
    put("case0", rng.integers(0, 256, (8, 8, 3), dtype=np.uint8),
        8, IMAGENET_MEAN, IMAGENET_SCALE)
    # downscale path
    put("case1", rng.integers(0, 256, (16, 16, 3), dtype=np.uint8),
        8, IMAGENET_MEAN, IMAGENET_SCALE)
    # grayscale input replicated across channels, non-square source
    put("case2", rng.integers(0, 256, (12, 10), dtype=np.uint8),
        8, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    # upscale path
    put("case3", rng.integers(0, 256, (5, 7, 3), dtype=np.uint8),
        12, IMAGENET_MEAN, IMAGENET_SCALE)

    OUT.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(OUT / "preproc_cases.npz", **cases)
    n = len({k.split("_")[0] for k in cases})
    print(f"wrote {OUT / 'preproc_cases.npz'} with {n} cases")


if __name__ == "__main__":
    main()
