import json

import pytest
from hypothesis import given, strategies as st

from flexdse.errors import ParseError, ValidationError
from flexdse.workload import (CONV2D, DWCONV, GEMM, Dim, Layer, divisors, effective_dims, embed_gemm,
                              layer_from_dict, load_model, model_from_dict, parse_dim)


def test_divisors_of_224():
    assert divisors(224) == [1, 2, 4, 7, 8, 14, 16, 28, 32, 56, 112, 224]


@given(st.integers(1, 5000))
def test_divisors_divide_and_are_complete(n):
    ds = divisors(n)
    assert ds == sorted(ds)
    assert ds == [d for d in range(1, n + 1) if n % d == 0]


def test_parse_dim_accepts_names_and_enums():
    assert parse_dim("K") is Dim.K
    assert parse_dim(Dim.S) is Dim.S
    with pytest.raises(ValidationError):
        parse_dim("Q")


def test_layer_macs_and_validation():
    layer = Layer("c", (4, 2, 4, 4, 3, 3))
    assert layer.macs == 4 * 2 * 4 * 4 * 9
    with pytest.raises(ValidationError):
        Layer("bad", (4, 2, 0, 4, 3, 3))
    with pytest.raises(ValidationError):
        Layer("bad", (4, 2, 4, 4, 3))
    with pytest.raises(ValidationError):
        Layer("dw", (4, 2, 4, 4, 3, 3), kind=DWCONV)


def test_depthwise_macs_skip_channel():
    layer = Layer("dw", (8, 1, 4, 4, 3, 3), kind=DWCONV)
    assert layer.macs == 8 * 4 * 4 * 9


def test_embed_gemm_modes():
    g = embed_gemm(8, 4, 16)
    assert g.dims == (8, 16, 4, 1, 1, 1) and g.kind == GEMM
    lit = embed_gemm(8, 4, 16, mode="literal")
    assert lit.dims == (8, 4, 16, 1, 1, 1)
    with pytest.raises(ValidationError):
        embed_gemm(8, 4, 16, mode="other")


def test_effective_dims():
    assert effective_dims(embed_gemm(256, 1, 128)) == {Dim.K, Dim.C}


def test_layer_from_dict_forms():
    conv = layer_from_dict({"name": "c", "kind": "CONV2D", "K": 4, "C": 2, "Y": 4, "X": 4, "R": 3, "S": 3})
    assert conv.kind == CONV2D and conv.stride == 1
    g = layer_from_dict({"name": "g", "kind": "GEMM", "M": 8, "N": 1, "K": 16})
    assert g.dims == (8, 16, 1, 1, 1, 1)
    with pytest.raises(ValidationError):
        layer_from_dict({"name": "c", "kind": "CONV2D", "K": 4, "C": 2, "Y": 4, "X": 4, "R": 3, "S": 3, "Z": 1})


def test_model_round_trip(tmp_path):
    m = model_from_dict({"name": "m", "layers": [{"name": "g", "kind": "GEMM", "M": 8, "N": 2, "K": 4}]})
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_dict()))
    assert load_model(path) == m


def test_read_errors(tmp_path):
    with pytest.raises(ValidationError):
        load_model(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_model(bad)
