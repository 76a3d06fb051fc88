"""Numeric inner loops: bilinear resize, convolution, pooling, dense, softmax.

Every hot kernel exists twice: a numba @njit version and a pure-numpy
version. The active path is chosen at import time: numba when available,
unless the environment variable ONIONLENS_NO_NUMBA is set to 1/true/yes.
Both paths implement the same arithmetic; the benchmark in
benchmarks/bench_kernels.py compares them.

Dtype discipline: image-plane resize runs in the caller's float dtype
(float64 for hashing, float32 for model input); all network kernels are
float32 in, float32 out, with float32 accumulation.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("ONIONLENS_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("numba disabled by ONIONLENS_NO_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # no-op decorator so the jit defs below stay importable
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# bilinear resize (half-pixel centers, border clamp)
# ---------------------------------------------------------------------------

def _resize_coords(in_size: int, out_size: int):
    scale = in_size / out_size
    f = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    f = np.clip(f, 0.0, in_size - 1)
    i0 = np.floor(f).astype(np.int64)
    i1 = np.minimum(i0 + 1, in_size - 1)
    w = f - i0
    return i0, i1, w


def _resize_bilinear_numpy(src, out_h, out_w):
    y0, y1, wy = _resize_coords(src.shape[0], out_h)
    x0, x1, wx = _resize_coords(src.shape[1], out_w)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    a = src[y0][:, x0]
    b = src[y0][:, x1]
    c = src[y1][:, x0]
    d = src[y1][:, x1]
    return (1.0 - wy) * ((1.0 - wx) * a + wx * b) + wy * ((1.0 - wx) * c + wx * d)


@njit(cache=True)
def _resize_bilinear_jit(src, out_h, out_w):
    in_h, in_w, ch = src.shape
    out = np.empty((out_h, out_w, ch), dtype=np.float64)
    sy = in_h / out_h
    sx = in_w / out_w
    for y in range(out_h):
        fy = (y + 0.5) * sy - 0.5
        if fy < 0.0:
            fy = 0.0
        if fy > in_h - 1:
            fy = in_h - 1
        y0 = int(np.floor(fy))
        y1 = min(y0 + 1, in_h - 1)
        wy = fy - y0
        for x in range(out_w):
            fx = (x + 0.5) * sx - 0.5
            if fx < 0.0:
                fx = 0.0
            if fx > in_w - 1:
                fx = in_w - 1
            x0 = int(np.floor(fx))
            x1 = min(x0 + 1, in_w - 1)
            wx = fx - x0
            for c in range(ch):
                a = src[y0, x0, c]
                b = src[y0, x1, c]
                cc = src[y1, x0, c]
                d = src[y1, x1, c]
                out[y, x, c] = (1.0 - wy) * ((1.0 - wx) * a + wx * b) + wy * ((1.0 - wx) * cc + wx * d)
    return out


def resize_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize an (H, W) or (H, W, C) float array with bilinear sampling.

    Interpolation always runs in float64 (identical arithmetic on both
    kernel paths); the result is cast back to the input dtype.
    """
    if src.dtype not in (np.float32, np.float64):
        raise TypeError(f"resize_bilinear expects float input, got {src.dtype}")
    squeeze = src.ndim == 2
    if squeeze:
        src = src[:, :, None]
    src64 = np.ascontiguousarray(src, dtype=np.float64)
    if HAS_NUMBA:
        out = _resize_bilinear_jit(src64, out_h, out_w)
    else:
        out = _resize_bilinear_numpy(src64, out_h, out_w)
    out = out.astype(src.dtype, copy=False)
    return out[:, :, 0] if squeeze else out


# ---------------------------------------------------------------------------
# convolution (cross-correlation, NCHW)
# ---------------------------------------------------------------------------

def _pad_nchw(x, pads, value=0.0):
    pt, pl, pb, pr = pads
    if pt == pl == pb == pr == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)), mode="constant",
                  constant_values=np.float32(value))


def _conv2d_numpy(xp, w, sh, sw, out_h, out_w):
    kh, kw = w.shape[2], w.shape[3]
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::sh, ::sw][:, :, :out_h, :out_w]
    return np.einsum("nchwij,ocij->nohw", win, w, optimize=True).astype(np.float32, copy=False)


@njit(cache=True)
def _conv2d_jit(xp, w, sh, sw, out_h, out_w):
    # Output row is the innermost loop: the accumulations are independent
    # per x, so LLVM vectorizes the broadcast multiply-add. The per-element
    # f32 addition order (c, then i, then j) matches the naive form.
    n, cin, _, _ = xp.shape
    cout, _, kh, kw = w.shape
    out = np.zeros((n, cout, out_h, out_w), dtype=np.float32)
    for b in range(n):
        for o in range(cout):
            for y in range(out_h):
                ys = y * sh
                row = out[b, o, y]
                for c in range(cin):
                    for i in range(kh):
                        xrow = xp[b, c, ys + i]
                        for j in range(kw):
                            wv = w[o, c, i, j]
                            if sw == 1:
                                xs = xrow[j:j + out_w]
                                for x in range(out_w):
                                    row[x] += xs[x] * wv
                            else:
                                for x in range(out_w):
                                    row[x] += xrow[x * sw + j] * wv
    return out


def conv_output_size(in_size: int, k: int, stride: int, pad_total: int) -> int:
    return (in_size + pad_total - k) // stride + 1


def same_pads(in_h, in_w, kh, kw, sh, sw):
    """SAME_UPPER zero padding: output spatial size = ceil(input / stride)."""
    out_h = -(-in_h // sh)
    out_w = -(-in_w // sw)
    ph = max((out_h - 1) * sh + kh - in_h, 0)
    pw = max((out_w - 1) * sw + kw - in_w, 0)
    return ph // 2, pw // 2, ph - ph // 2, pw - pw // 2


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None,
           stride=(1, 1), pads=(0, 0, 0, 0)) -> np.ndarray:
    """Standard cross-correlation on NCHW input with OIHW weights.

    pads is (top, left, bottom, right); use same_pads() for "same" padding.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError("conv2d expects 4-D input and weights")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"channel mismatch: input {x.shape[1]} vs weights {w.shape[1]}")
    x = np.ascontiguousarray(x, dtype=np.float32)
    w = np.ascontiguousarray(w, dtype=np.float32)
    sh, sw = stride
    pt, pl, pb, pr = pads
    out_h = conv_output_size(x.shape[2], w.shape[2], sh, pt + pb)
    out_w = conv_output_size(x.shape[3], w.shape[3], sw, pl + pr)
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"kernel {w.shape[2:]} does not fit input {x.shape[2:]} with pads {pads}")
    xp = _pad_nchw(x, pads)
    if HAS_NUMBA:
        out = _conv2d_jit(xp, w, sh, sw, out_h, out_w)
    else:
        out = _conv2d_numpy(xp, w, sh, sw, out_h, out_w)
    if b is not None:
        out += b.astype(np.float32).reshape(1, -1, 1, 1)
    return out


# ---------------------------------------------------------------------------
# max pooling
# ---------------------------------------------------------------------------

def _maxpool_numpy(xp, kh, kw, sh, sw, out_h, out_w):
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::sh, ::sw][:, :, :out_h, :out_w]
    return win.max(axis=(4, 5))


@njit(cache=True)
def _maxpool_jit(xp, kh, kw, sh, sw, out_h, out_w):
    n, c, _, _ = xp.shape
    out = np.empty((n, c, out_h, out_w), dtype=np.float32)
    for b in range(n):
        for ch in range(c):
            for y in range(out_h):
                ys = y * sh
                for x in range(out_w):
                    xs = x * sw
                    m = xp[b, ch, ys, xs]
                    for i in range(kh):
                        for j in range(kw):
                            v = xp[b, ch, ys + i, xs + j]
                            if v > m:
                                m = v
                    out[b, ch, y, x] = m
    return out


def maxpool2d(x: np.ndarray, kernel=(2, 2), stride=None, pads=(0, 0, 0, 0)) -> np.ndarray:
    """Max pooling on NCHW input; padded cells never win (filled with -inf)."""
    kh, kw = kernel
    sh, sw = stride if stride is not None else kernel
    pt, pl, pb, pr = pads
    x = np.ascontiguousarray(x, dtype=np.float32)
    out_h = conv_output_size(x.shape[2], kh, sh, pt + pb)
    out_w = conv_output_size(x.shape[3], kw, sw, pl + pr)
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"pool window {kernel} does not fit input {x.shape[2:]} with pads {pads}")
    xp = _pad_nchw(x, pads, value=-np.inf)
    if HAS_NUMBA:
        return _maxpool_jit(xp, kh, kw, sh, sw, out_h, out_w)
    return _maxpool_numpy(xp, kh, kw, sh, sw, out_h, out_w)


# ---------------------------------------------------------------------------
# dense / gemm
# ---------------------------------------------------------------------------

def _gemm_numpy(x, w):
    return (x @ w.T).astype(np.float32, copy=False)


@njit(cache=True)
def _gemm_jit(x, wt):
    # wt is the (in, out) transpose so the inner loop reads it contiguously;
    # the reduction order over p is unchanged, so results match the naive
    # dot-product form bit for bit.
    n, k = x.shape
    m = wt.shape[1]
    out = np.zeros((n, m), dtype=np.float32)
    for i in range(n):
        for p in range(k):
            xv = x[i, p]
            row = wt[p]
            for j in range(m):
                out[i, j] += xv * row[j]
    return out


def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Fully connected layer: x @ w.T + b with w laid out (out, in)."""
    if x.ndim != 2 or w.ndim != 2:
        raise ValueError("dense expects 2-D input and weights")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"feature mismatch: input {x.shape[1]} vs weights {w.shape[1]}")
    x = np.ascontiguousarray(x, dtype=np.float32)
    w = np.ascontiguousarray(w, dtype=np.float32)
    if HAS_NUMBA:
        out = _gemm_jit(x, np.ascontiguousarray(w.T))
    else:
        out = _gemm_numpy(x, w)
    if b is not None:
        out += b.astype(np.float32).reshape(1, -1)
    return out


# ---------------------------------------------------------------------------
# cheap elementwise / reduction kernels (single implementation)
# ---------------------------------------------------------------------------

def batchnorm(x: np.ndarray, scale, bias, mean, var, eps: float = 1e-5) -> np.ndarray:
    """Inference-mode batch normalization over the channel axis of NCHW input."""
    shape = (1, -1) + (1,) * (x.ndim - 2)
    scale = np.asarray(scale, dtype=np.float32).reshape(shape)
    bias = np.asarray(bias, dtype=np.float32).reshape(shape)
    mean = np.asarray(mean, dtype=np.float32).reshape(shape)
    var = np.asarray(var, dtype=np.float32).reshape(shape)
    inv = scale / np.sqrt(var + np.float32(eps))
    return ((x - mean) * inv + bias).astype(np.float32, copy=False)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, np.float32(0.0))


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Mean over the spatial axes of NCHW input, keeping 1x1 spatial dims."""
    return x.mean(axis=(2, 3), keepdims=True, dtype=np.float32)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    e = np.exp((x - m).astype(np.float32))
    return e / e.sum(axis=axis, keepdims=True, dtype=np.float32)


def popcount64(v: int) -> int:
    return int(v & 0xFFFFFFFFFFFFFFFF).bit_count()


def warmup() -> None:
    """Trigger jit compilation of every hot kernel on tiny inputs."""
    resize_bilinear(np.zeros((4, 4), dtype=np.float64), 2, 3)
    resize_bilinear(np.zeros((4, 4, 3), dtype=np.float32), 2, 3)
    x = np.zeros((1, 2, 5, 5), dtype=np.float32)
    conv2d(x, np.zeros((3, 2, 3, 3), dtype=np.float32), np.zeros(3, dtype=np.float32))
    maxpool2d(x, (2, 2), (2, 2))
    dense(np.zeros((1, 4), dtype=np.float32), np.zeros((2, 4), dtype=np.float32))
