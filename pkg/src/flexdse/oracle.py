"""Brute-force references: a literal loop-nest simulator and exhaustive search."""
from __future__ import annotations

import csv
import json
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .accel import AcceleratorSpec
from .cost import (DEFAULT_ENERGY, TENSORS, CostReport, EnergyParams, compute_cycles, dram_traffic,
                   evaluate, layer_energy, memory_cycles, tensor_dims, trip_counts)
from .errors import GuardExceeded, InfeasibleSpace, SpaceTooLarge
from .mapping import Mapping
from .mapspace import (enumerate_space, feasible_size, order_choices, parallel_choices,
                       shape_choices, tile_choices)
from .workload import Layer

SIM_GUARD = 10**6
EXHAUSTIVE_CAP = 10**5


@dataclass(frozen=True)
class TraceStats:
    fetches: dict[str, int]
    evictions: dict[str, int]
    visited_tiles: int


def simulate(layer: Layer, m: Mapping, guard: int = SIM_GUARD, trace: str | Path | None = None) -> TraceStats:
    """Walk every inter-tile iteration and count per-tensor tile loads.

    The loop nest is executed literally (outermost loop varies slowest) and a
    tensor is reloaded whenever its tile coordinate differs from the resident
    one.  ``trace`` optionally names a CSV file receiving every load event.
    """
    trips = trip_counts(layer, m.tiles)
    total = math.prod(trips)
    if total > guard:
        raise GuardExceeded(f"{total} inter-tile iterations exceed the simulation guard {guard}")
    rel = tensor_dims(layer.kind)
    # positions (within the loop order) that index each tensor
    picks = {t: [i for i, d in enumerate(m.order) if d in rel[t]] for t in TENSORS}
    resident = dict.fromkeys(TENSORS)
    fetches = dict.fromkeys(TENSORS, 0)
    rows = []
    visited = 0
    for idx in itertools.product(*(range(trips[d]) for d in m.order)):
        visited += 1
        for t in TENSORS:
            coord = tuple(idx[i] for i in picks[t])
            if coord != resident[t]:
                resident[t] = coord
                fetches[t] += 1
                if trace is not None:
                    rows.append((visited - 1, t, " ".join(map(str, coord))))
    if trace is not None:
        with open(trace, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "tensor", "coordinate"])
            writer.writerows(rows)
    return TraceStats(fetches, {t: fetches[t] - 1 for t in TENSORS}, visited)


def _objective(report: CostReport, objective: str):
    return report.objective(objective)


def naive_best(layer: Layer, accel: AcceleratorSpec, objective: str = "runtime",
               ep: EnergyParams = DEFAULT_ENERGY, energy_adder: Fraction = Fraction(0)):
    """Evaluate every feasible mapping one by one.  Slow; used as a test oracle."""
    best = None
    for m in enumerate_space(layer, accel):
        rep = evaluate(layer, accel, m, ep, energy_adder)
        cand = (_objective(rep, objective), m.key())
        if best is None or cand < best[0]:
            best = (cand, m, rep)
    if best is None:
        raise InfeasibleSpace(f"no feasible mapping for layer {layer.name!r} on {accel.name!r}")
    return best[1], best[2]


def _compact(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def exhaustive_best(layer: Layer, accel: AcceleratorSpec, objective: str = "runtime",
                    ep: EnergyParams = DEFAULT_ENERGY, energy_adder: Fraction = Fraction(0),
                    cap: int = EXHAUSTIVE_CAP) -> tuple[Mapping, CostReport]:
    """Exact minimiser over the whole feasible space.

    Traffic depends only on (tiles, order) and compute only on (tiles,
    parallel, shape), so the search evaluates each factor once and combines
    them; the result equals evaluating every joint point.  Ties go to the
    smallest canonical serialization.
    """
    size = feasible_size(layer, accel)
    if size > cap:
        raise SpaceTooLarge(f"feasible space of {size} mappings exceeds the exhaustive cap {cap}")
    tiles = tile_choices(layer, accel)
    orders = order_choices(layer, accel)
    pairs = parallel_choices(layer, accel)
    shapes = shape_choices(layer, accel)
    if not (tiles and orders and pairs and shapes):
        raise InfeasibleSpace(f"no feasible mapping for layer {layer.name!r} on {accel.name!r}")
    macs = layer.macs
    adder = Fraction(energy_adder)
    # The canonical key serialises order, parallel, shape, tiles in that
    # order and each part is prefix-free, so comparing per-part strings as a
    # tuple is the same as comparing whole keys.
    oj = {o: _compact([d.name for d in o]) for o in orders}
    psj = {(p, s): (_compact([d.name for d in p]), _compact(list(s))) for p in pairs for s in shapes}
    probe = Mapping(tiles[0], orders[0], pairs[0], shapes[0])

    best = None  # (value, key tuple, mapping)
    for t in tiles:
        base = probe.replace(tiles=t)
        mem, energy = {}, {}
        for o in orders:
            traffic = dram_traffic(layer, base.replace(order=o)).total
            mem[o] = memory_cycles(traffic, accel.bandwidth)
            energy[o] = layer_energy(traffic, macs, ep, adder)
        comp = {ps: compute_cycles(layer, base.replace(parallel=ps[0], shape=ps[1])) for ps in psj}
        cmin = min(comp.values())
        if objective == "runtime":
            val = max(cmin, min(mem.values()))
            o_best = min((o for o in orders if mem[o] <= val), key=oj.get)
            ps_best = min((ps for ps, c in comp.items() if c <= val), key=psj.get)
        elif objective == "energy":
            val = min(energy.values())
            o_best = min((o for o in orders if energy[o] == val), key=oj.get)
            ps_best = min(comp, key=psj.get)
        elif objective == "edp":
            edp = {o: energy[o] * max(cmin, mem[o]) for o in orders}
            val = min(edp.values())
            options = []
            for o in orders:
                if edp[o] != val:
                    continue
                limit = max(cmin, mem[o])
                ps = min((ps for ps, c in comp.items() if max(c, mem[o]) == limit), key=psj.get)
                options.append((oj[o], psj[ps], o, ps))
            _, _, o_best, ps_best = min(options)
        else:
            raise ValueError(f"unknown objective {objective!r}")
        if best is not None and val > best[0]:
            continue
        m = Mapping(t, o_best, ps_best[0], ps_best[1])
        key = (oj[o_best], *psj[ps_best], json.dumps(m.to_dict()["tiles"], sort_keys=True, separators=(",", ":")))
        if best is None or (val, key) < best[:2]:
            best = (val, key, m)
    m = best[2]
    return m, evaluate(layer, accel, m, ep, adder)
