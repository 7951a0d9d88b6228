import json
from fractions import Fraction

import pytest

from flexdse.accel import (AcceleratorSpec, BufferConfig, FlexClass, FlexConstraints, accel_from_dict,
                           load_accel, native_orders, native_parallel_dims)
from flexdse.errors import ConsistencyError, ValidationError
from flexdse.mapping import Mapping
from flexdse.workload import Dim


def test_flex_class_parsing():
    c = FlexClass.parse("1010")
    assert (c.bit("T"), c.bit("O"), c.bit("P"), c.bit("S")) == (1, 0, 1, 0)
    assert str(c) == "1010"
    assert len(FlexClass.all_classes()) == 16
    with pytest.raises(ValidationError):
        FlexClass.parse("10x0")


def test_hard_ratios_are_normalised():
    b = BufferConfig(90, "hard", (1, 1, 1))
    assert b.ratios == (Fraction(1, 3),) * 3
    assert b.shares() == (30, 30, 30)
    with pytest.raises(ValidationError):
        BufferConfig(90, "hard", (1, 0, 1))
    with pytest.raises(ValidationError):
        BufferConfig(90, "soft", (1, 1, 1))


def test_round_trip(tiny, tmp_path):
    path = tmp_path / "a.json"
    path.write_text(json.dumps(tiny.to_dict()))
    assert load_accel(path) == tiny


def test_flex_bits_must_match_constraints(tiny):
    with pytest.raises(ConsistencyError):
        tiny.replace(flex_class=FlexClass.parse("0100"))
    with pytest.raises(ConsistencyError):
        tiny.replace(constraints=FlexConstraints(order="all"))


def test_explicit_lists_must_contain_baseline(tiny):
    with pytest.raises(ConsistencyError):
        tiny.replace(flex_class=FlexClass.parse("0010"),
                     constraints=FlexConstraints(parallel=(("Y", "X"), ("X", "Y"))))


def test_baseline_must_fit(tiny):
    with pytest.raises(ConsistencyError):
        tiny.replace(baseline=tiny.baseline.replace(shape=(4, 2)))
    with pytest.raises(ConsistencyError):
        tiny.replace(buffer=BufferConfig(8))


def test_shape_block_needs_two_shapes(full):
    ok = full.replace(flex_class=FlexClass.parse("0001"), constraints=FlexConstraints(shape=16))
    assert ok.constraints.shape == 16
    with pytest.raises(ConsistencyError):
        full.replace(flex_class=FlexClass.parse("0001"), constraints=FlexConstraints(shape=32))


def test_native_dims_rules():
    assert len(native_orders(6)) == 720
    three = native_orders(3)
    assert all(set(o[:3]) == {Dim.X, Dim.R, Dim.S} for o in three)
    assert len({o[3:] for o in three}) == 6
    assert set(native_parallel_dims(3)) == {Dim.K, Dim.C, Dim.Y}


def test_unknown_fields_rejected(tiny):
    d = tiny.to_dict()
    d["colour"] = "red"
    with pytest.raises(ValidationError):
        accel_from_dict(d)


def test_degree_labels(full):
    assert full.degree("T") == "InFlex"
    flex = full.replace(flex_class=FlexClass.parse("0010"), constraints=FlexConstraints(parallel="all"))
    assert flex.degree("P") == "FullFlex"
    part = full.replace(flex_class=FlexClass.parse("0010"),
                        constraints=FlexConstraints(parallel=(("K", "C"), ("Y", "X"))))
    assert part.degree("P") == "PartFlex"


def test_bandwidth_must_be_positive(tiny):
    with pytest.raises(ValidationError):
        tiny.replace(bandwidth=0)


def test_spec_is_hashable_and_comparable(tiny):
    assert tiny == AcceleratorSpec(**{f: getattr(tiny, f) for f in
                                      ("name", "n_pe", "buffer", "bandwidth", "flex_class",
                                       "constraints", "baseline", "native_dims")})
    assert isinstance(tiny.baseline, Mapping)
