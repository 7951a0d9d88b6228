"""Deterministic analytical cost model for one mapping of one layer.

The model has a single on-chip level.  Inter-tile loops run in ``order``; a
tensor tile stays resident while only loops irrelevant to it (or with a
single trip) iterate inside the innermost loop that touches it.  Runtime is a
roofline of compute cycles and DRAM transfer time.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

from .accel import AcceleratorSpec, parse_fraction
from .errors import ValidationError
from .mapping import Mapping, footprint_of
from .workload import DIMS, DWCONV, Dim, Layer, read_json

TENSORS = ("weights", "inputs", "outputs")

_CONV_REL = {
    "weights": frozenset({Dim.K, Dim.C, Dim.R, Dim.S}),
    "inputs": frozenset({Dim.C, Dim.Y, Dim.X, Dim.R, Dim.S}),
    "outputs": frozenset({Dim.K, Dim.Y, Dim.X}),
}
_DW_REL = {
    "weights": frozenset({Dim.K, Dim.R, Dim.S}),
    "inputs": frozenset({Dim.K, Dim.Y, Dim.X, Dim.R, Dim.S}),
    "outputs": frozenset({Dim.K, Dim.Y, Dim.X}),
}


def tensor_dims(kind: str) -> dict[str, frozenset[Dim]]:
    """Dims indexing each tensor; GEMM layers reuse the convolution sets."""
    return _DW_REL if kind == DWCONV else _CONV_REL


def trip_counts(layer: Layer, tiles: Sequence[int]) -> tuple[int, ...]:
    return tuple(-(-layer.dims[d] // tiles[d]) for d in DIMS)


def fetch_count(order: Sequence[Dim], trips: Sequence[int], rel: frozenset) -> int:
    """Tile loads of a tensor: strip the innermost loops that cannot evict it."""
    cut = len(order)
    while cut and (order[cut - 1] not in rel or trips[order[cut - 1]] == 1):
        cut -= 1
    return math.prod(trips[d] for d in order[:cut])


class Traffic(NamedTuple):
    weights: int
    inputs: int
    outputs: int
    fetches: tuple[int, int, int]
    output_rmw: bool

    @property
    def total(self) -> int:
        return self.weights + self.inputs + self.outputs


def dram_traffic(layer: Layer, m: Mapping) -> Traffic:
    trips = trip_counts(layer, m.tiles)
    rel = tensor_dims(layer.kind)
    fp = footprint_of(m.tiles, layer.stride, layer.kind)
    fetches = tuple(fetch_count(m.order, trips, rel[t]) for t in TENSORS)
    w, i, o = (size * n for size, n in zip(fp, fetches))
    # partial sums leave the chip and come back when outputs are refetched
    rmw = fetches[2] > math.prod(trips[d] for d in rel["outputs"])
    if rmw:
        o *= 2
    return Traffic(w, i, o, fetches, rmw)


def layer_macs(layer: Layer) -> int:
    return layer.macs


def compute_cycles(layer: Layer, m: Mapping) -> int:
    p1, p2 = m.parallel
    h, w = m.shape
    t = m.tiles
    per_tile = -(-t[p1] // h) * -(-t[p2] // w)
    for d in DIMS:
        if d in (p1, p2) or (layer.kind == DWCONV and d == Dim.C):
            continue
        per_tile *= t[d]
    return per_tile * math.prod(trip_counts(layer, t))


@dataclass(frozen=True)
class EnergyParams:
    e_dram: Fraction = Fraction(160)
    e_buf: Fraction = Fraction(6)
    e_mac: Fraction = Fraction(1)

    def __post_init__(self):
        for name in ("e_dram", "e_buf", "e_mac"):
            value = parse_fraction(getattr(self, name), name)
            if value < 0:
                raise ValidationError(f"{name} must be >= 0")
            object.__setattr__(self, name, value)

    def to_dict(self) -> dict:
        return {"e_dram": str(self.e_dram), "e_buf": str(self.e_buf), "e_mac": str(self.e_mac)}

    @classmethod
    def from_dict(cls, obj) -> "EnergyParams":
        if not isinstance(obj, dict):
            raise ValidationError("energy parameters must be an object")
        unknown = set(obj) - {"e_dram", "e_buf", "e_mac"}
        if unknown:
            raise ValidationError(f"energy parameters: unknown fields {sorted(unknown)}")
        return cls(**obj)


DEFAULT_ENERGY = EnergyParams()


def load_energy(path: str | Path) -> EnergyParams:
    return EnergyParams.from_dict(read_json(path))


@dataclass(frozen=True)
class CostReport:
    compute_cycles: int
    dram_traffic: int
    traffic_weights: int
    traffic_inputs: int
    traffic_outputs: int
    buffer_accesses: int
    macs: int
    utilization: Fraction
    runtime_cycles: int
    energy: Fraction
    edp: Fraction

    def objective(self, name: str):
        if name == "runtime":
            return self.runtime_cycles
        if name == "energy":
            return self.energy
        if name == "edp":
            return self.edp
        raise ValidationError(f"unknown objective {name!r}")

    def to_dict(self) -> dict:
        return {
            "compute_cycles": self.compute_cycles,
            "dram_traffic": self.dram_traffic,
            "traffic": {"weights": self.traffic_weights, "inputs": self.traffic_inputs,
                        "outputs": self.traffic_outputs},
            "buffer_accesses": self.buffer_accesses,
            "macs": self.macs,
            "utilization": self.utilization,
            "runtime_cycles": self.runtime_cycles,
            "energy": self.energy,
            "edp": self.edp,
        }


OBJECTIVES = ("runtime", "energy", "edp")


def memory_cycles(traffic: int, bandwidth: Fraction) -> int:
    return math.ceil(Fraction(traffic) / bandwidth)


def layer_energy(traffic: int, macs: int, ep: EnergyParams, energy_adder: Fraction = Fraction(0)) -> Fraction:
    return ep.e_dram * traffic + (ep.e_buf + energy_adder) * (3 * macs) + ep.e_mac * macs


def evaluate(layer: Layer, accel: AcceleratorSpec, m: Mapping,
             ep: EnergyParams = DEFAULT_ENERGY, energy_adder: Fraction = Fraction(0)) -> CostReport:
    """Cost of ``m``; legality is the caller's responsibility."""
    traffic = dram_traffic(layer, m)
    compute = compute_cycles(layer, m)
    macs = layer.macs
    h, w = m.shape
    runtime = max(compute, memory_cycles(traffic.total, accel.bandwidth))
    energy = layer_energy(traffic.total, macs, ep, Fraction(energy_adder))
    return CostReport(
        compute_cycles=compute,
        dram_traffic=traffic.total,
        traffic_weights=traffic.weights,
        traffic_inputs=traffic.inputs,
        traffic_outputs=traffic.outputs,
        buffer_accesses=3 * macs,
        macs=macs,
        utilization=Fraction(macs, h * w * compute),
        runtime_cycles=runtime,
        energy=energy,
        edp=energy * runtime,
    )


def json_default(obj):
    """``json.dumps`` hook rendering exact rationals with fixed precision."""
    if isinstance(obj, Fraction):
        return float(f"{float(obj):.6f}")
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=json_default) + "\n"
