"""Parametric area and per-access energy overhead of flexibility features."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .accel import AcceleratorSpec, parse_fraction
from .errors import ValidationError
from .workload import read_json

FEATURES = (
    "tile_regs", "soft_partition_mux",
    "order_addr_gens", "order_pe_counter_reg",
    "parallel_addr_counters", "parallel_pe_mux",
    "shape_multicast_noc", "shape_pe_demux", "reduction_noc",
)
PER_PE = frozenset({"order_pe_counter_reg", "parallel_pe_mux", "shape_pe_demux"})
BASELINE_KEYS = ("area_per_pe", "area_per_buffer_element", "area_fixed_noc")


@dataclass(frozen=True)
class FeatureCost:
    area_units: Fraction
    energy_adder_per_access: Fraction


@dataclass(frozen=True)
class FeatureCostTable:
    features: dict[str, FeatureCost]
    area_per_pe: Fraction
    area_per_buffer_element: Fraction
    area_fixed_noc: Fraction

    @classmethod
    def from_dict(cls, obj) -> "FeatureCostTable":
        if not isinstance(obj, dict):
            raise ValidationError("cost table must be an object")
        unknown = set(obj) - {"features", "baseline", "note"}
        if unknown:
            raise ValidationError(f"cost table: unknown fields {sorted(unknown)}")
        feats_obj = obj.get("features", {})
        base_obj = obj.get("baseline", {})
        if set(feats_obj) != set(FEATURES):
            raise ValidationError(f"cost table must define exactly the features {list(FEATURES)}")
        if set(base_obj) != set(BASELINE_KEYS):
            raise ValidationError(f"cost table baseline must define {list(BASELINE_KEYS)}")
        feats = {}
        for name in FEATURES:
            entry = feats_obj[name]
            if not isinstance(entry, dict) or set(entry) != {"area_units", "energy_adder_per_access"}:
                raise ValidationError(f"feature {name!r} needs area_units and energy_adder_per_access")
            area = parse_fraction(entry["area_units"], f"{name}.area_units")
            energy = parse_fraction(entry["energy_adder_per_access"], f"{name}.energy_adder_per_access")
            if area < 0 or energy < 0:
                raise ValidationError(f"feature {name!r} costs must be >= 0")
            feats[name] = FeatureCost(area, energy)
        base = {k: parse_fraction(base_obj[k], k) for k in BASELINE_KEYS}
        if any(v < 0 for v in base.values()):
            raise ValidationError("baseline area terms must be >= 0")
        return cls(feats, **base)


def load_cost_table(path: str | Path) -> FeatureCostTable:
    return FeatureCostTable.from_dict(read_json(path))


def enabled_features(accel: AcceleratorSpec) -> list[str]:
    cls = accel.flex_class
    out = []
    if cls.t:
        out.append("tile_regs")
        if accel.buffer.partitioning == "soft":
            out.append("soft_partition_mux")
    if cls.o:
        out += ["order_addr_gens", "order_pe_counter_reg"]
    if cls.p:
        out += ["parallel_addr_counters", "parallel_pe_mux"]
    if cls.s:
        out += ["shape_multicast_noc", "shape_pe_demux", "reduction_noc"]
    return out


@dataclass(frozen=True)
class Overhead:
    baseline_area: Fraction
    flex_area: Fraction
    overhead_fraction: Fraction
    energy_adders: Fraction
    features: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "baseline_area": self.baseline_area,
            "flex_area": self.flex_area,
            "overhead_fraction": self.overhead_fraction,
            "energy_adders": self.energy_adders,
            "features": list(self.features),
        }


def overhead(accel: AcceleratorSpec, tbl: FeatureCostTable) -> Overhead:
    buffer_elems = accel.buffer.size or 0
    baseline = (accel.n_pe * tbl.area_per_pe + buffer_elems * tbl.area_per_buffer_element
                + tbl.area_fixed_noc)
    feats = enabled_features(accel)
    flex = sum((tbl.features[f].area_units * (accel.n_pe if f in PER_PE else 1) for f in feats),
               Fraction(0))
    adders = sum((tbl.features[f].energy_adder_per_access for f in feats), Fraction(0))
    frac = flex / baseline if baseline else Fraction(0)
    return Overhead(baseline, flex, frac, adders, tuple(feats))
