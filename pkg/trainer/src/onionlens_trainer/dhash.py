"""Difference hash for manifest bookkeeping.

Same scheme as the scanning side (9x8 luma grid, bit set where a cell
outranks its right neighbour) but computed with Pillow's resampler, so
hashes from this module are for labeling generated images, not for
cross-checking hashes produced elsewhere.
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def dhash64(img: Image.Image) -> int:
    grid = img.convert("L").resize((9, 8), Image.Resampling.BILINEAR)
    px = np.asarray(grid)
    h = 0
    for r in range(8):
        for c in range(8):
            if px[r, c] > px[r, c + 1]:
                h |= 1 << (r * 8 + c)
    return h
