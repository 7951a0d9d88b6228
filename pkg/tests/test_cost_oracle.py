import math
import random
from fractions import Fraction

import pytest

from flexdse.cost import (EnergyParams, compute_cycles, dram_traffic, evaluate, fetch_count, trip_counts,
                          tensor_dims)
from flexdse.dse import make_variant
from flexdse.errors import GuardExceeded, SpaceTooLarge, ValidationError
from flexdse.fixtures import tiny_cnn, tiny_gemm
from flexdse.mapping import Mapping, parse_order
from flexdse.mapspace import enumerate_space
from flexdse.oracle import exhaustive_best, naive_best, simulate
from flexdse.workload import Dim, Layer, embed_gemm


def test_gemm_full_utilisation(tiny):
    layer = embed_gemm(8, 4, 8)  # K=8, C=8, Y=4
    m = Mapping((8, 8, 4, 1, 1, 1), "YXKCRS", ("K", "C"), (2, 2))
    assert compute_cycles(layer, m) == 8 * 8 * 4 // 4
    rep = evaluate(layer, tiny.replace(bandwidth=Fraction(10**6)), m)
    assert rep.utilization == 1
    assert rep.runtime_cycles == rep.compute_cycles == 64


def test_gemm_8x8x4_on_16_pes():
    layer = embed_gemm(8, 4, 8)
    m = Mapping((8, 8, 4, 1, 1, 1), "YXKCRS", ("K", "C"), (8, 2))
    assert compute_cycles(layer, m) == 16


def test_underutilised_parallel_dims():
    layer = embed_gemm(16, 1, 8)  # Y = 1
    m = Mapping((16, 8, 1, 1, 1, 1), "YXKCRS", ("Y", "X"), (2, 2))
    assert compute_cycles(layer, m) == 16 * 8


def test_fetch_count_strips_irrelevant_and_unit_loops():
    trips = (2, 3, 1, 4, 1, 1)
    assert fetch_count(parse_order("KCYXRS"), trips, frozenset({Dim.K, Dim.C})) == 6
    assert fetch_count(parse_order("CKXYRS"), trips, frozenset({Dim.K, Dim.C})) == 6
    assert fetch_count(parse_order("KXCYRS"), trips, frozenset({Dim.K, Dim.C})) == 24


def test_output_rmw_doubles_traffic():
    layer = Layer("c", (2, 4, 2, 1, 1, 1))
    m = Mapping((1, 1, 1, 1, 1, 1), "KYCXRS", ("K", "C"), (1, 1))
    tr = dram_traffic(layer, m)
    assert not tr.output_rmw
    m2 = m.replace(order=parse_order("CKYXRS"))
    tr2 = dram_traffic(layer, m2)
    assert tr2.output_rmw and tr2.outputs == 2 * tr2.fetches[2]


def test_energy_formula():
    layer = embed_gemm(4, 4, 4)
    m = Mapping((4, 4, 4, 1, 1, 1), "YXKCRS", ("K", "C"), (2, 2))
    ep = EnergyParams(160, 6, 1)
    rep = evaluate(layer, _acc(), m, ep, Fraction(1, 4))
    assert rep.energy == 160 * rep.dram_traffic + (6 + Fraction(1, 4)) * 3 * 64 + 64
    assert rep.edp == rep.energy * rep.runtime_cycles


def _acc():
    from flexdse.fixtures import tiny_base
    return tiny_base()


def test_energy_params_validation():
    with pytest.raises(ValidationError):
        EnergyParams(-1, 6, 1)
    assert EnergyParams.from_dict(EnergyParams(160, 6, 1).to_dict()) == EnergyParams(160, 6, 1)


@pytest.mark.parametrize("layer", tiny_cnn().layers + tiny_gemm().layers, ids=lambda l: l.name)
def test_oracle_matches_closed_form(tiny, layer):
    acc = make_variant(tiny, "1111")
    maps = list(enumerate_space(layer, acc))
    rng = random.Random(3)
    rel = tensor_dims(layer.kind)
    for m in rng.sample(maps, min(60, len(maps))):
        sim = simulate(layer, m)
        tr = dram_traffic(layer, m)
        assert tr.fetches == tuple(sim.fetches[t] for t in ("weights", "inputs", "outputs"))
        trips = trip_counts(layer, m.tiles)
        assert sim.visited_tiles == math.prod(trips)
        assert tr.output_rmw == (sim.fetches["outputs"] > math.prod(trips[d] for d in rel["outputs"]))


def test_simulation_guard():
    layer = Layer("big", (64, 64, 32, 32, 1, 1))
    with pytest.raises(GuardExceeded):
        simulate(layer, Mapping((1,) * 6, "KCYXRS", ("K", "C"), (1, 1)), guard=1000)


def test_trace_file(tmp_path):
    layer = Layer("c", (2, 2, 2, 1, 1, 1))
    m = Mapping((1, 1, 1, 1, 1, 1), "KCYXRS", ("K", "C"), (1, 1))
    out = tmp_path / "trace.csv"
    sim = simulate(layer, m, trace=out)
    lines = out.read_text().splitlines()
    assert lines[0] == "iteration,tensor,coordinate"
    assert len(lines) - 1 == sum(sim.fetches.values())


@pytest.mark.parametrize("objective", ["runtime", "energy", "edp"])
def test_exhaustive_equals_naive(tiny, objective):
    classes = ("1111", "1000", "0110") if objective == "runtime" else ("1000", "0110")
    for cls in classes:
        acc = make_variant(tiny, cls)
        for layer in tiny_cnn().layers[:3]:
            m1, r1 = exhaustive_best(layer, acc, objective)
            m2, r2 = naive_best(layer, acc, objective)
            assert m1 == m2 and r1 == r2


def test_exhaustive_cap(tiny):
    acc = make_variant(tiny, "1111")
    with pytest.raises(SpaceTooLarge):
        exhaustive_best(tiny_cnn().layers[0], acc, cap=10)
