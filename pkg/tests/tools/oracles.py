"""Reference implementations used to generate test fixtures.

Everything here is written directly from the definitions (scalar loops,
float64) and deliberately imports nothing from the package under test.
Slow is fine; independent is the point.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------------------
# image math
# ---------------------------------------------------------------------------

def ref_resize_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-center bilinear resampling with border clamp, float64."""
    src = np.asarray(src, dtype=np.float64)
    squeeze = src.ndim == 2
    if squeeze:
        src = src[:, :, None]
    in_h, in_w, ch = src.shape
    out = np.zeros((out_h, out_w, ch), dtype=np.float64)
    scale_y = in_h / out_h
    scale_x = in_w / out_w
    for oy in range(out_h):
        sy = (oy + 0.5) * scale_y - 0.5
        y0 = math.floor(sy)
        fy = sy - y0
        y0c = min(max(y0, 0), in_h - 1)
        y1c = min(max(y0 + 1, 0), in_h - 1)
        for ox in range(out_w):
            sx = (ox + 0.5) * scale_x - 0.5
            x0 = math.floor(sx)
            fx = sx - x0
            x0c = min(max(x0, 0), in_w - 1)
            x1c = min(max(x0 + 1, 0), in_w - 1)
            for c in range(ch):
                top = src[y0c, x0c, c] * (1 - fx) + src[y0c, x1c, c] * fx
                bot = src[y1c, x0c, c] * (1 - fx) + src[y1c, x1c, c] * fx
                out[oy, ox, c] = top * (1 - fy) + bot * fy
    return out[:, :, 0] if squeeze else out


def ref_luma(pixels: np.ndarray) -> np.ndarray:
    """BT.601 luma from HWC uint8 (1 or 3 channels), float64."""
    px = np.asarray(pixels, dtype=np.float64)
    if px.ndim == 2:
        return px
    if px.shape[2] == 1:
        return px[:, :, 0]
    return 0.299 * px[:, :, 0] + 0.587 * px[:, :, 1] + 0.114 * px[:, :, 2]


def ref_dhash(pixels: np.ndarray) -> int:
    """64-bit difference hash of an HWC uint8 image."""
    grid = ref_resize_bilinear(ref_luma(pixels), 8, 9)
    h = 0
    for r in range(8):
        for c in range(8):
            if grid[r, c] > grid[r, c + 1]:
                h |= 1 << (r * 8 + c)
    return h


def ref_hamming(a: int, b: int) -> int:
    return bin(a ^ b).count("1")


def ref_greedy_dedupe(hashes: list[int], threshold: int) -> list[int]:
    """Indices kept by greedy first-wins dedup (brute force O(n^2))."""
    kept: list[int] = []
    for i, h in enumerate(hashes):
        if all(ref_hamming(h, hashes[j]) > threshold for j in kept):
            kept.append(i)
    return kept


# ---------------------------------------------------------------------------
# network operators (scalar reference)
# ---------------------------------------------------------------------------

def ref_conv2d(x, w, b=None, stride=(1, 1), pads=(0, 0, 0, 0)):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, cin, ih, iw = x.shape
    cout, cin2, kh, kw = w.shape
    assert cin == cin2
    sh, sw = stride
    pt, pl, pb, pr = pads
    oh = (ih + pt + pb - kh) // sh + 1
    ow = (iw + pl + pr - kw) // sw + 1
    out = np.zeros((n, cout, oh, ow), dtype=np.float64)
    for ni in range(n):
        for co in range(cout):
            bias = 0.0 if b is None else float(b[co])
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(cin):
                        for ky in range(kh):
                            iy = oy * sh + ky - pt
                            if iy < 0 or iy >= ih:
                                continue
                            for kx in range(kw):
                                ix = ox * sw + kx - pl
                                if ix < 0 or ix >= iw:
                                    continue
                                acc += x[ni, ci, iy, ix] * w[co, ci, ky, kx]
                    out[ni, co, oy, ox] = acc + bias
    return out


def ref_maxpool(x, kernel=(2, 2), stride=(2, 2), pads=(0, 0, 0, 0)):
    x = np.asarray(x, dtype=np.float64)
    n, c, ih, iw = x.shape
    kh, kw = kernel
    sh, sw = stride
    pt, pl, pb, pr = pads
    oh = (ih + pt + pb - kh) // sh + 1
    ow = (iw + pl + pr - kw) // sw + 1
    out = np.full((n, c, oh, ow), -np.inf, dtype=np.float64)
    for ni in range(n):
        for ci in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    best = -np.inf
                    for ky in range(kh):
                        iy = oy * sh + ky - pt
                        if iy < 0 or iy >= ih:
                            continue
                        for kx in range(kw):
                            ix = ox * sw + kx - pl
                            if ix < 0 or ix >= iw:
                                continue
                            best = max(best, x[ni, ci, iy, ix])
                    out[ni, ci, oy, ox] = best
    return out


def ref_dense(x, w, b=None):
    """x (N,K), w (M,K) pre-transposed, optional bias (M,)."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, k = x.shape
    m, k2 = w.shape
    assert k == k2
    out = np.zeros((n, m), dtype=np.float64)
    for ni in range(n):
        for mi in range(m):
            acc = 0.0
            for ki in range(k):
                acc += x[ni, ki] * w[mi, ki]
            out[ni, mi] = acc + (0.0 if b is None else float(b[mi]))
    return out


def ref_batchnorm(x, scale, bias, mean, var, eps=1e-5):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for ci in range(x.shape[1]):
        g = float(scale[ci]) / math.sqrt(float(var[ci]) + eps)
        out[:, ci] = (x[:, ci] - float(mean[ci])) * g + float(bias[ci])
    return out


def ref_relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def ref_gap(x):
    x = np.asarray(x, dtype=np.float64)
    return x.mean(axis=(2, 3), keepdims=True)


def ref_softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def ref_flatten(x):
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(x.shape[0], -1)


def ref_preprocess(pixels: np.ndarray, size: int, mean, scale) -> np.ndarray:
    """uint8 HWC -> (1,3,size,size) float64 per the preprocessing recipe."""
    px = np.asarray(pixels, dtype=np.float64)
    if px.ndim == 2:
        px = px[:, :, None]
    if px.shape[2] == 1:
        px = np.repeat(px, 3, axis=2)
    if px.shape[0] != size or px.shape[1] != size:
        px = ref_resize_bilinear(px, size, size)
    px = px / 255.0
    px = (px - np.asarray(mean, dtype=np.float64)) / np.asarray(scale, dtype=np.float64)
    return px.transpose(2, 0, 1)[None]


# ---------------------------------------------------------------------------
# evaluation measures (tallied from raw pairs, no matrix algebra)
# ---------------------------------------------------------------------------

def ref_metrics_from_pairs(pairs: list[tuple[int, int]], n: int) -> dict:
    """Per-class precision/recall and accuracy from (actual, predicted)
    index pairs over n classes. Zero denominators give 0.0."""
    out = {"precision": [], "recall": [], "accuracy": 0.0}
    for c in range(n):
        pred_c = sum(1 for _, p in pairs if p == c)
        act_c = sum(1 for a, _ in pairs if a == c)
        hit_c = sum(1 for a, p in pairs if a == c and p == c)
        out["precision"].append(hit_c / pred_c if pred_c else 0.0)
        out["recall"].append(hit_c / act_c if act_c else 0.0)
    correct = sum(1 for a, p in pairs if a == p)
    out["accuracy"] = correct / len(pairs) if pairs else 0.0
    return out
