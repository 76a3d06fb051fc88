"""Model loading: validation, shape inference, ordering, metadata."""

from __future__ import annotations

import json

import numpy as np
import pytest

from onionlens import onnxio
from onionlens.errors import (
    MissingMetadata,
    ParseError,
    ShapeMismatch,
    UnsupportedOperator,
)
from onionlens.model import (
    ModelGraph,
    PreprocSpec,
    count_parameters,
    load_model,
    model_info,
    toposort,
    validate_model,
)

import onnx_writer as ow


def load_fixture(fixtures_dir, name: str) -> ModelGraph:
    return load_model(str(fixtures_dir / "models" / name))


def decode(data: bytes) -> onnxio.ModelDef:
    return onnxio.decode_model(data)


META25 = ow.standard_metadata(total=25, trainable=25)


def dense_graph(**overrides) -> bytes:
    """A valid 4->5 Gemm model; keyword overrides swap individual pieces."""
    w = np.ones((5, 4), dtype=np.float32)
    b = np.zeros(5, dtype=np.float32)
    parts = dict(
        nodes=[ow.node("Gemm", ["x", "w", "b"], ["y"], "fc", {"transB": 1})],
        initializers=[ow.tensor("w", w), ow.tensor("b", b)],
        inputs=[ow.value_info("x", ["N", 4])],
        outputs=[ow.value_info("y", ["N", 5])],
        meta=META25,
    )
    parts.update(overrides)
    meta = parts.pop("meta")
    g = ow.graph(parts["nodes"], parts["initializers"], parts["inputs"],
                 parts["outputs"], name="t")
    return ow.model(g, meta)


# ---------------------------------------------------------------------------
# fixture models load (or refuse) as designed
# ---------------------------------------------------------------------------

def test_dense4x5_loads(fixtures_dir):
    m = load_fixture(fixtures_dir, "dense4x5.onnx")
    assert m.total_params == 25  # 5*4 weight + 5 bias
    assert m.trainable_params == 25
    assert list(m.input_shape) == [None, 4]
    assert len(m.nodes) == 1 and m.nodes[0].op_type == "Gemm"
    assert [c.canonical_id for c in m.class_order] == [
        "drugs", "weapons", "bank_cards", "identity_documents",
        "illegal_currencies"]


def test_dense5x5_id_loads(fixtures_dir):
    m = load_fixture(fixtures_dir, "dense5x5_id.onnx")
    assert m.total_params == 30  # 5*5 identity + 5 bias
    assert [n.op_type for n in m.nodes] == ["Gemm", "Softmax"]


def test_micro_e2e_loads_and_sorts(fixtures_dir):
    path = str(fixtures_dir / "models" / "micro_e2e.onnx")
    m = load_model(path)
    assert m.total_params == 839
    assert len(m.nodes) == 12

    # the file stores nodes scrambled; the loader must reorder them
    raw = onnxio.read_model(path)
    stored = [n.name for n in raw.graph.nodes]
    sorted_names = [n.name for n in m.nodes]
    assert stored != sorted_names

    # in the sorted list every activation input is already produced
    produced = {m.input_name}
    for node in m.nodes:
        for inp in node.inputs:
            assert (not inp) or inp in produced or inp in m.initializers, \
                f"{node.name} consumes {inp!r} before it exists"
        produced.update(node.outputs)


def test_toposort_is_deterministic(fixtures_dir):
    path = str(fixtures_dir / "models" / "micro_e2e.onnx")
    a = load_model(path)
    b = load_model(path)
    assert [n.name for n in a.nodes] == [n.name for n in b.nodes]


def test_scanmodel_loads(fixtures_dir):
    m = load_fixture(fixtures_dir, "scanmodel.onnx")
    assert m.total_params == 20  # 3*5 weight + 5 bias
    assert m.preproc.size == 32
    assert m.preproc.mean == (0.0, 0.0, 0.0)
    assert m.preproc.scale == (1.0, 1.0, 1.0)
    assert [n.op_type for n in m.nodes] == [
        "GlobalAveragePool", "Flatten", "Gemm", "Softmax"]


@pytest.mark.parametrize("name,exc,fragment", [
    ("lstm_reject.onnx", UnsupportedOperator, "LSTM"),
    ("missing_meta.onnx", MissingMetadata, "class_order"),
    ("badcount.onnx", MissingMetadata, "total_params"),
])
def test_fixture_rejections(fixtures_dir, name, exc, fragment):
    with pytest.raises(exc, match=fragment):
        load_fixture(fixtures_dir, name)


# ---------------------------------------------------------------------------
# parameter counting
# ---------------------------------------------------------------------------

def test_count_parameters_sums_initializers():
    m = decode(dense_graph())
    assert count_parameters(m.graph) == 5 * 4 + 5


def test_count_parameters_random_shapes():
    rng = np.random.default_rng(7)
    for _ in range(20):
        shapes = [tuple(rng.integers(1, 6, size=rng.integers(1, 4)))
                  for _ in range(rng.integers(1, 5))]
        inits = [ow.tensor(f"t{i}", np.zeros(s, dtype=np.float32))
                 for i, s in enumerate(shapes)]
        g = ow.graph([], inits, [ow.value_info("x", ["N", 4])],
                     [ow.value_info("y", ["N", 5])], name="p")
        m = decode(ow.model(g, META25))
        assert count_parameters(m.graph) == sum(int(np.prod(s)) for s in shapes)


# ---------------------------------------------------------------------------
# structural rejection matrix
# ---------------------------------------------------------------------------

def conv_model(attrs: dict, w_shape=(2, 3, 3, 3), in_shape=("N", 3, 8, 8)) -> bytes:
    w = np.zeros(w_shape, dtype=np.float32)
    fc = np.zeros((5, int(w_shape[0] * 6 * 6)), dtype=np.float32)
    nodes = [
        ow.node("Conv", ["x", "w"], ["c"], "conv",
                {"kernel_shape": [w_shape[2], w_shape[3]], **attrs}),
        ow.node("Flatten", ["c"], ["f"], "flat", {"axis": 1}),
        ow.node("Gemm", ["f", "fc"], ["y"], "fc", {"transB": 1}),
    ]
    g = ow.graph(nodes,
                 [ow.tensor("w", w), ow.tensor("fc", fc)],
                 [ow.value_info("x", list(in_shape))],
                 [ow.value_info("y", ["N", 5])], name="c")
    total = w.size + fc.size
    return ow.model(g, ow.standard_metadata(total=int(total), trainable=0, size=8))


@pytest.mark.parametrize("attrs,fragment", [
    ({"group": 2}, "group"),
    ({"dilations": [2, 2]}, "dilations"),
    ({"auto_pad": "SAME_UPPER"}, "auto_pad"),
])
def test_conv_variants_rejected(attrs, fragment):
    with pytest.raises(UnsupportedOperator, match=fragment):
        validate_model(decode(conv_model(attrs)))


def test_unsupported_op_rejected():
    data = dense_graph(nodes=[ow.node("Tanh", ["x"], ["y"], "t")])
    with pytest.raises(UnsupportedOperator, match="Tanh"):
        validate_model(decode(data))


def test_gemm_transa_and_alpha_rejected():
    for attrs, frag in [({"transB": 1, "transA": 1}, "transA"),
                        ({"transB": 1, "alpha": 0.5}, "alpha")]:
        data = dense_graph(nodes=[ow.node("Gemm", ["x", "w", "b"], ["y"], "fc", attrs)])
        with pytest.raises(UnsupportedOperator, match=frag):
            validate_model(decode(data))


def test_maxpool_ceil_mode_rejected():
    pool = ow.node("MaxPool", ["x"], ["p"], "mp",
                   {"kernel_shape": [2, 2], "ceil_mode": 1})
    data = conv_model({})  # placeholder for metadata shape
    w = np.zeros((5, 3 * 4 * 4), dtype=np.float32)
    g = ow.graph(
        [pool,
         ow.node("Flatten", ["p"], ["f"], "flat", {"axis": 1}),
         ow.node("Gemm", ["f", "fc"], ["y"], "fcn", {"transB": 1})],
        [ow.tensor("fc", w)],
        [ow.value_info("x", ["N", 3, 8, 8])],
        [ow.value_info("y", ["N", 5])], name="mp")
    data = ow.model(g, ow.standard_metadata(total=int(w.size), trainable=0))
    with pytest.raises(UnsupportedOperator, match="ceil_mode"):
        validate_model(decode(data))


def test_cycle_rejected():
    nodes = [ow.node("Relu", ["t2"], ["t1"], "r1"),
             ow.node("Relu", ["t1"], ["t2"], "r2")]
    data = dense_graph(nodes=nodes)
    with pytest.raises(ShapeMismatch, match="cycle|unresolvable"):
        validate_model(decode(data))


def test_dangling_input_rejected():
    data = dense_graph(nodes=[ow.node("Gemm", ["ghost", "w", "b"], ["y"], "fc",
                                      {"transB": 1})])
    with pytest.raises(ShapeMismatch, match="ghost"):
        validate_model(decode(data))


def test_two_graph_inputs_rejected():
    data = dense_graph(inputs=[ow.value_info("x", ["N", 4]),
                               ow.value_info("x2", ["N", 4])])
    with pytest.raises(ParseError, match="one input"):
        validate_model(decode(data))


def test_no_nodes_rejected():
    data = dense_graph(nodes=[])
    with pytest.raises(ParseError, match="no nodes"):
        validate_model(decode(data))


def test_integer_initializer_rejected():
    data = dense_graph(initializers=[
        ow.tensor("w", np.ones((5, 4), dtype=np.int64)),
        ow.tensor("b", np.zeros(5, dtype=np.float32))])
    with pytest.raises(ParseError, match="float32"):
        validate_model(decode(data))


def test_wrong_output_width_rejected():
    w = np.ones((4, 4), dtype=np.float32)
    data = dense_graph(
        nodes=[ow.node("Gemm", ["x", "w"], ["y"], "fc", {"transB": 1})],
        initializers=[ow.tensor("w", w)],
        outputs=[ow.value_info("y", ["N", 4])],
        meta=ow.standard_metadata(total=16, trainable=16))
    with pytest.raises(ShapeMismatch, match="\\(N, 5\\)"):
        validate_model(decode(data))


def test_gemm_feature_mismatch_rejected():
    data = dense_graph(inputs=[ow.value_info("x", ["N", 7])])
    with pytest.raises(ShapeMismatch, match="features"):
        validate_model(decode(data))


def test_maxpool_window_too_big_rejected():
    w = np.zeros((5, 3), dtype=np.float32)
    g = ow.graph(
        [ow.node("MaxPool", ["x"], ["p"], "mp", {"kernel_shape": [9, 9]}),
         ow.node("GlobalAveragePool", ["p"], ["g"], "gap"),
         ow.node("Flatten", ["g"], ["f"], "flat", {"axis": 1}),
         ow.node("Gemm", ["f", "fc"], ["y"], "fcn", {"transB": 1})],
        [ow.tensor("fc", w)],
        [ow.value_info("x", ["N", 3, 8, 8])],
        [ow.value_info("y", ["N", 5])], name="big")
    data = ow.model(g, ow.standard_metadata(total=15, trainable=0))
    with pytest.raises(ShapeMismatch, match="fit"):
        validate_model(decode(data))


def test_flatten_axis_out_of_range_rejected():
    data = dense_graph(nodes=[
        ow.node("Flatten", ["x"], ["f"], "flat", {"axis": 5}),
        ow.node("Gemm", ["f", "w", "b"], ["y"], "fc", {"transB": 1})])
    with pytest.raises(ShapeMismatch, match="axis"):
        validate_model(decode(data))


def test_batchnorm_training_outputs_rejected():
    scale = np.ones(3, dtype=np.float32)
    inits = [ow.tensor(n, scale.copy()) for n in ("s", "bb", "mu", "var")]
    w = np.zeros((5, 3), dtype=np.float32)
    g = ow.graph(
        [ow.node("BatchNormalization", ["x", "s", "bb", "mu", "var"],
                 ["y1", "running_mean"], "bn"),
         ow.node("GlobalAveragePool", ["y1"], ["g"], "gap"),
         ow.node("Flatten", ["g"], ["f"], "flat", {"axis": 1}),
         ow.node("Gemm", ["f", "fc"], ["y"], "fcn", {"transB": 1})],
        inits + [ow.tensor("fc", w)],
        [ow.value_info("x", ["N", 3, 8, 8])],
        [ow.value_info("y", ["N", 5])], name="bn")
    data = ow.model(g, ow.standard_metadata(total=27, trainable=0))
    with pytest.raises((UnsupportedOperator, ShapeMismatch)):
        validate_model(decode(data))


# ---------------------------------------------------------------------------
# metadata validation
# ---------------------------------------------------------------------------

def meta_variant(**changes) -> dict[str, str]:
    meta = dict(META25)
    for k, v in changes.items():
        if v is None:
            meta.pop(k, None)
        else:
            meta[k] = v
    return meta


@pytest.mark.parametrize("changes,fragment", [
    ({"class_order": None}, "class_order"),
    ({"class_order": "drugs,weapons,bank_cards"}, "5 categories"),
    ({"class_order": "drugs,drugs,weapons,bank_cards,identity_documents"},
     "duplicate"),
    ({"class_order": "drugs,weapons,bank_cards,identity_documents,tax_fraud"},
     "unknown"),
    ({"preproc": None}, "preproc"),
    ({"preproc": "{broken"}, "JSON"),
    ({"preproc": "[1, 2]"}, "object"),
    ({"preproc": json.dumps({"size": 0, "mean": [0, 0, 0],
                             "scale": [1, 1, 1], "resize": "bilinear"})},
     "positive"),
    ({"preproc": json.dumps({"size": 32, "mean": [0, 0],
                             "scale": [1, 1, 1], "resize": "bilinear"})},
     "three"),
    ({"preproc": json.dumps({"size": 32, "mean": [0, 0, 0],
                             "scale": [1, 0, 1], "resize": "bilinear"})},
     "non-zero"),
    ({"preproc": json.dumps({"size": 32, "mean": [0, 0, 0],
                             "scale": [1, 1, 1], "resize": "nearest"})},
     "resize"),
    ({"preproc": json.dumps({"size": 32, "mean": [0, 0, 0], "scale": [1, 1, 1],
                             "resize": "bilinear", "channel_order": "bgr"})},
     "channel"),
    ({"total_params": None}, "total_params"),
    ({"total_params": "26"}, "26"),
    ({"total_params": "lots"}, "integer"),
    ({"trainable_params": None}, "trainable_params"),
    ({"trainable_params": "-1"}, "outside"),
    ({"trainable_params": "999"}, "outside"),
])
def test_metadata_rejections(changes, fragment):
    data = dense_graph(meta=meta_variant(**changes))
    with pytest.raises(MissingMetadata, match=fragment):
        validate_model(decode(data))


def test_preproc_roundtrip():
    spec = PreprocSpec(size=32, mean=(0.0, 0.0, 0.0), scale=(1.0, 1.0, 1.0))
    again = PreprocSpec.from_json(spec.to_json())
    assert again == spec


def test_preproc_defaults_channel_order():
    spec = PreprocSpec.from_json(json.dumps(
        {"size": 64, "mean": [0.5, 0.5, 0.5], "scale": [0.3, 0.3, 0.3],
         "resize": "bilinear"}))
    assert spec.channel_order == "rgb"
    assert spec.size == 64


# ---------------------------------------------------------------------------
# model_info
# ---------------------------------------------------------------------------

def test_model_info_structure(fixtures_dir):
    m = load_fixture(fixtures_dir, "micro_e2e.onnx")
    info = model_info(m)
    assert info["total_params"] == 839
    assert info["class_order"][0] == "drugs"
    assert len(info["nodes"]) == 12
    assert info["nodes"][-1]["op_type"] == "Softmax"
    assert info["nodes"][-1]["output_shape"] == [None, 5]
    json.dumps(info)  # must be serializable as-is


def test_toposort_already_ordered_is_stable(fixtures_dir):
    """A file whose nodes are already in execution order keeps that order."""
    raw = onnxio.read_model(str(fixtures_dir / "models" / "dense5x5_id.onnx"))
    ordered = toposort(raw.graph, "x")
    assert [n.name for n in ordered] == [n.name for n in raw.graph.nodes]
