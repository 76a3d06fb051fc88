"""Compute kernels against frozen float64 oracle fixtures, algebraic
properties, and bit-identity between the jit and numpy paths."""

import os
import pathlib
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onionlens import kernels

CASES = np.load(pathlib.Path(__file__).parent / "fixtures" / "kernels" / "cases.npz")


def case(prefix: str) -> dict:
    fields = {}
    for key in CASES.files:
        head, _, field = key.partition("_")
        if head == prefix:
            fields[field] = CASES[key]
    assert fields, f"no fixture case {prefix}"
    return fields


def assert_close(got, expected, rtol=1e-4, atol=1e-6):
    np.testing.assert_allclose(np.asarray(got, dtype=np.float64), expected,
                               rtol=rtol, atol=atol)


# ---------------------------------------------------------------------------
# frozen fixtures
# ---------------------------------------------------------------------------

def test_conv_hand_case_exact():
    c = case("conv0")
    got = kernels.conv2d(c["x"], c["w"])
    np.testing.assert_array_equal(got.reshape(2, 2), [[12.0, 16.0], [24.0, 28.0]])


@pytest.mark.parametrize("name", ["conv0", "conv1", "conv2", "conv3"])
def test_conv_fixture(name):
    c = case(name)
    got = kernels.conv2d(c["x"], c["w"], c.get("b"),
                         tuple(c["stride"]), tuple(c["pads"]))
    assert_close(got, c["expected"])


@pytest.mark.parametrize("name", ["maxpool0", "maxpool1", "maxpool2"])
def test_maxpool_fixture(name):
    c = case(name)
    got = kernels.maxpool2d(c["x"], tuple(c["kernel"]), tuple(c["stride"]),
                            tuple(c["pads"]))
    assert_close(got, c["expected"])


@pytest.mark.parametrize("name", ["dense0", "dense1"])
def test_dense_fixture(name):
    c = case(name)
    assert_close(kernels.dense(c["x"], c["w"], c.get("b")), c["expected"])


@pytest.mark.parametrize("name", ["batchnorm0", "batchnorm1"])
def test_batchnorm_fixture(name):
    c = case(name)
    got = kernels.batchnorm(c["x"], c["scale"], c["bias"], c["mean"], c["var"],
                            float(c["eps"]))
    assert_close(got, c["expected"], rtol=1e-5)


def test_gap_fixture():
    c = case("gap0")
    assert_close(kernels.global_avg_pool(c["x"]), c["expected"], rtol=1e-6)


@pytest.mark.parametrize("name", ["softmax0", "softmax1"])
def test_softmax_fixture(name):
    c = case(name)
    got = kernels.softmax(c["x"], int(c["axis"]))
    assert_close(got, c["expected"], rtol=0, atol=1e-6)


@pytest.mark.parametrize("name", ["resize0", "resize1", "resize2", "resize3"])
def test_resize_fixture(name):
    c = case(name)
    oh, ow = (int(v) for v in c["out_hw"])
    src = c["src"]
    if src.dtype == np.uint8:
        src = src.astype(np.float64)
    got = kernels.resize_bilinear(src, oh, ow)
    got = np.asarray(got, dtype=np.float64)
    if name == "resize0":
        # Upscale pushes sample coords below zero at the border.  The kernel
        # clamps the coordinate before taking the weight, the reference clamps
        # only the neighbour indices, so the two blend the duplicated border
        # pixel with different weights; that costs at most one ulp.
        np.testing.assert_allclose(got, c["expected"], rtol=0, atol=1e-10)
    else:
        # float64 core: in-range coords must match the oracle exactly
        np.testing.assert_array_equal(got, c["expected"])


def test_resize_rejects_integer_input():
    src = np.zeros((8, 8, 3), dtype=np.uint8)
    with pytest.raises(TypeError, match="float"):
        kernels.resize_bilinear(src, 4, 4)


def test_resize_identity_is_copy():
    src = np.random.default_rng(0).uniform(0, 255, (6, 7))
    np.testing.assert_array_equal(kernels.resize_bilinear(src, 6, 7), src)


# ---------------------------------------------------------------------------
# trivial identities and guards
# ---------------------------------------------------------------------------

def test_relu_clamps():
    x = np.array([[-1.0, 0.0, 2.5]], dtype=np.float32)
    np.testing.assert_array_equal(kernels.relu(x), [[0.0, 0.0, 2.5]])


def test_conv_identity_kernel():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1, 1, 5, 5)).astype(np.float32)
    w = np.ones((1, 1, 1, 1), dtype=np.float32)
    np.testing.assert_allclose(kernels.conv2d(x, w), x, rtol=1e-6)


def test_conv_shape_errors():
    x = np.zeros((1, 2, 4, 4), dtype=np.float32)
    with pytest.raises(ValueError):
        kernels.conv2d(x, np.zeros((1, 3, 3, 3), dtype=np.float32))
    with pytest.raises(ValueError):
        kernels.conv2d(x, np.zeros((1, 2, 9, 9), dtype=np.float32))
    with pytest.raises(ValueError):
        kernels.conv2d(np.zeros((4, 4), dtype=np.float32),
                       np.zeros((1, 1, 2, 2), dtype=np.float32))


def test_dense_shape_errors():
    with pytest.raises(ValueError):
        kernels.dense(np.zeros((2, 3), dtype=np.float32),
                      np.zeros((4, 5), dtype=np.float32))


def test_maxpool_padding_never_wins():
    x = np.full((1, 1, 2, 2), -5.0, dtype=np.float32)
    out = kernels.maxpool2d(x, (2, 2), (1, 1), (1, 1, 1, 1))
    assert out.max() == -5.0
    assert np.isfinite(out).all()


def test_popcount64():
    assert kernels.popcount64(0) == 0
    assert kernels.popcount64(0xFFFFFFFFFFFFFFFF) == 64
    assert kernels.popcount64(0b1011) == 3


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

small = st.floats(min_value=-3, max_value=3, allow_nan=False, width=32)


@st.composite
def conv_inputs(draw):
    n = draw(st.integers(1, 2))
    cin = draw(st.integers(1, 3))
    cout = draw(st.integers(1, 3))
    hw = draw(st.integers(3, 6))
    k = draw(st.integers(1, min(3, hw)))
    rng = np.random.default_rng(draw(st.integers(0, 2**31)))
    x = rng.standard_normal((n, cin, hw, hw)).astype(np.float32)
    w = rng.standard_normal((cout, cin, k, k)).astype(np.float32)
    return x, w


@given(conv_inputs(), st.floats(min_value=-2, max_value=2, allow_nan=False))
@settings(max_examples=40, deadline=None)
def test_conv_linearity(xw, alpha):
    """conv(αx, w) == α·conv(x, w) within float32 noise."""
    x, w = xw
    a = kernels.conv2d(x * np.float32(alpha), w)
    b = kernels.conv2d(x, w) * np.float32(alpha)
    np.testing.assert_allclose(a, b, rtol=1e-4, atol=1e-5)


@given(conv_inputs())
@settings(max_examples=30, deadline=None)
def test_conv_additivity(xw):
    x, w = xw
    x2 = x[::-1].copy() if x.shape[0] > 1 else x * np.float32(0.5)
    a = kernels.conv2d(x + x2, w)
    b = kernels.conv2d(x, w) + kernels.conv2d(x2, w)
    np.testing.assert_allclose(a, b, rtol=1e-4, atol=1e-5)


@given(st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_maxpool_bounds(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, 2, 6, 6)).astype(np.float32)
    out = kernels.maxpool2d(x, (2, 2), (2, 2))
    assert out.max() <= x.max()
    assert out.min() >= x.min()
    # each output is an element of the input
    assert np.isin(out, x).all()


@given(st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_gap_equals_mean(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3, 4, 5)).astype(np.float32)
    out = kernels.global_avg_pool(x)
    assert out.shape == (2, 3, 1, 1)
    np.testing.assert_allclose(out[:, :, 0, 0], x.mean(axis=(2, 3)), rtol=1e-5)


@given(st.integers(0, 2**31), st.floats(min_value=-50, max_value=50,
                                        allow_nan=False))
@settings(max_examples=40, deadline=None)
def test_softmax_sum_and_shift_invariance(seed, shift):
    rng = np.random.default_rng(seed)
    x = (rng.standard_normal((3, 5)) * 5).astype(np.float32)
    p = kernels.softmax(x)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-6)
    q = kernels.softmax(x + np.float32(shift))
    np.testing.assert_allclose(p, q, atol=1e-6)


@given(st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_batchnorm_matches_scalar_formula(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, 3, 4, 4)).astype(np.float32)
    scale = rng.uniform(0.5, 1.5, 3).astype(np.float32)
    bias = rng.standard_normal(3).astype(np.float32)
    mean = rng.standard_normal(3).astype(np.float32)
    var = rng.uniform(0.1, 2.0, 3).astype(np.float32)
    got = kernels.batchnorm(x, scale, bias, mean, var, 1e-5)
    for c in range(3):
        ref = (x[0, c].astype(np.float64) - float(mean[c])) \
            * float(scale[c]) / np.sqrt(float(var[c]) + 1e-5) + float(bias[c])
        np.testing.assert_allclose(got[0, c], ref, rtol=1e-5, atol=1e-6)


# ---------------------------------------------------------------------------
# backend selection and cross-path bit identity
# ---------------------------------------------------------------------------

def test_backend_reports_a_known_value():
    assert kernels.backend() in ("numba", "numpy")


_CROSS_PATH_SCRIPT = r"""
import json, sys
import numpy as np
from onionlens import kernels
z = np.load(sys.argv[1])
out = {}
rng = np.random.default_rng(99)
img = rng.integers(0, 256, (37, 53, 3), dtype=np.uint8)
luma = (img.astype(np.float64) * [0.299, 0.587, 0.114]).sum(axis=2)
out["resize"] = kernels.resize_bilinear(luma, 8, 9).tobytes().hex()
c = {k: z[k] for k in z.files if k.startswith("conv1_")}
got = kernels.conv2d(z["conv1_x"], z["conv1_w"], z["conv1_b"],
                     tuple(z["conv1_stride"]), tuple(z["conv1_pads"]))
out["conv_shape"] = list(got.shape)
out["backend"] = kernels.backend()
print(json.dumps(out))
"""


def run_cross_path(no_numba: bool) -> dict:
    import json

    env = dict(os.environ)
    if no_numba:
        env["ONIONLENS_NO_NUMBA"] = "1"
    else:
        env.pop("ONIONLENS_NO_NUMBA", None)
    fixture = str(pathlib.Path(__file__).parent / "fixtures" / "kernels" / "cases.npz")
    res = subprocess.run([sys.executable, "-c", _CROSS_PATH_SCRIPT, fixture],
                        capture_output=True, text=True, env=env, timeout=300)
    assert res.returncode == 0, res.stderr
    return json.loads(res.stdout)


def test_resize_bit_identical_across_backends():
    """The float64 resize must agree bit for bit between the jit kernel and
    the numpy fallback; the dedup hash depends on it."""
    jit = run_cross_path(no_numba=False)
    plain = run_cross_path(no_numba=True)
    assert plain["backend"] == "numpy"
    assert jit["resize"] == plain["resize"]


def test_env_flag_switches_backend():
    plain = run_cross_path(no_numba=True)
    assert plain["backend"] == "numpy"
    assert plain["conv_shape"] == [1, 4, 8, 8]
