"""Shipped desk-scale workloads, accelerators, cost tables and experiments.

Everything here is built in code; ``python -m flexdse.fixtures`` writes the
same objects as JSON under ``flexdse/fixtures/`` and the test-suite checks
that the two never drift apart.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .accel import AcceleratorSpec, BufferConfig, FlexConstraints, accel_from_dict
from .cost import EnergyParams
from .dse import SHAPE_BLOCKS, axis_variants, make_variant
from .errors import ConsistencyError, ValidationError
from .mapping import Mapping
from .mapspace import feasible_size
from .oracle import EXHAUSTIVE_CAP
from .overhead import FeatureCostTable
from .workload import CONV2D, DWCONV, Layer, Model, embed_gemm, model_from_dict, read_json

FIXTURE_DIR = Path(__file__).resolve().parent / "fixtures"
BASELINE_ORDER = "YXKCRS"  # output stationary


def conv(name, k, c, y, x, r, s, kind=CONV2D) -> Layer:
    return Layer(name, (k, c, y, x, r, s), 1, kind)


# ----------------------------------------------------------------- models

def tiny_cnn() -> Model:
    return Model("tiny_cnn", (
        conv("t_conv", 4, 2, 4, 1, 3, 1),
        conv("t_pw", 8, 4, 2, 2, 1, 1),
        conv("t_dw", 4, 1, 4, 1, 3, 1, DWCONV),
        conv("t_conv_b", 4, 4, 1, 4, 1, 3),
        embed_gemm(8, 2, 8, name="t_fc"),
    ))


def tiny_gemm() -> Model:
    return Model("tiny_gemm", (
        embed_gemm(8, 8, 8, name="t_square"),
        embed_gemm(16, 2, 4, name="t_tall_skinny"),
        embed_gemm(16, 1, 8, name="t_matvec"),
    ))


def toy_cnn() -> Model:
    # spatially heavy early layers, channel heavy late layers
    return Model("toy_cnn", (
        conv("conv1", 16, 3, 32, 32, 3, 3),
        conv("conv2", 32, 16, 16, 16, 3, 3),
        conv("dw3", 32, 1, 16, 16, 3, 3, DWCONV),
        conv("pw4", 32, 32, 16, 16, 1, 1),
        conv("conv5", 32, 32, 8, 8, 3, 3),
    ))


def gemm_square() -> Model:
    return Model("gemm_square", (embed_gemm(64, 64, 64, name="square"),))


def gemm_tall_skinny() -> Model:
    return Model("gemm_tall_skinny", (embed_gemm(512, 8, 64, name="tall_skinny"),))


def gemv() -> Model:
    return Model("gemv", (embed_gemm(256, 1, 128, name="matvec"),))


def toy_gemm() -> Model:
    layers = gemm_square().layers + gemm_tall_skinny().layers + gemv().layers
    return Model("toy_gemm", layers)


def resnet_conv2_1() -> Model:
    return Model("resnet_conv2_1", (conv("conv2_1", 64, 64, 56, 56, 3, 3),))


MODELS = {f.__name__: f for f in (tiny_cnn, tiny_gemm, toy_cnn, gemm_square, gemm_tall_skinny,
                                  gemv, toy_gemm, resnet_conv2_1)}


# ----------------------------------------------------------------- accelerators

def tiny_base() -> AcceleratorSpec:
    return AcceleratorSpec(
        name="InFlex-0000", n_pe=4, buffer=BufferConfig(64), bandwidth=2,
        flex_class="0000", constraints=FlexConstraints(),
        baseline=Mapping((2, 2, 2, 2, 1, 1), BASELINE_ORDER, ("K", "C"), (2, 2)))


def full_base() -> AcceleratorSpec:
    return AcceleratorSpec(
        name="InFlex-0000", n_pe=1024, buffer=BufferConfig(4096), bandwidth=128,
        flex_class="0000", constraints=FlexConstraints(),
        baseline=Mapping((32, 32, 4, 4, 1, 1), BASELINE_ORDER, ("K", "C"), (32, 32)))


def _family(prefix: str, base: AcceleratorSpec) -> dict[str, AcceleratorSpec]:
    out = {}
    for axis in "TOPS":
        for v in axis_variants(base, axis):
            out[v.name] = v
    full = make_variant(base, "1111")
    out[full.name] = full
    return {f"{prefix}_{name.lower().replace('-', '_')}": v.replace(name=f"{prefix}-{name}")
            for name, v in out.items()}


def _check_exhaustive(accels: dict[str, AcceleratorSpec]) -> None:
    """Tiny variants must stay small enough for exhaustive search on tiny models."""
    for acc in accels.values():
        for model in (tiny_cnn(), tiny_gemm()):
            for layer in model.layers:
                size = feasible_size(layer, acc)
                if size > EXHAUSTIVE_CAP:
                    raise ConsistencyError(f"{acc.name} on {layer.name}: feasible space {size} > cap")


@lru_cache(maxsize=1)
def accelerators() -> dict[str, AcceleratorSpec]:
    out = {}
    out.update(_family("tiny", tiny_base()))
    _check_exhaustive({k: v for k, v in out.items() if k.startswith("tiny_")})
    out.update(_family("full", full_base()))
    return dict(sorted(out.items()))


# ----------------------------------------------------------------- configuration

def default_energy() -> EnergyParams:
    return EnergyParams(160, 6, 1)


def cost_table_dict() -> dict:
    def f(area, energy):
        return {"area_units": area, "energy_adder_per_access": energy}
    return {
        "note": "Example configuration in abstract area units; not synthesis results.",
        "baseline": {"area_per_pe": 1, "area_per_buffer_element": "1/20", "area_fixed_noc": 50},
        "features": {
            "tile_regs": f("1/2", 0),
            "soft_partition_mux": f(1, "1/50"),
            "order_addr_gens": f(1, "1/50"),
            "order_pe_counter_reg": f("1/500", 0),
            "parallel_addr_counters": f("4/5", "1/50"),
            "parallel_pe_mux": f("1/500", "1/20"),
            "shape_multicast_noc": f("6/5", "1/20"),
            "shape_pe_demux": f("1/500", "1/20"),
            "reduction_noc": f("6/5", "1/20"),
        },
    }


def default_cost_table() -> FeatureCostTable:
    return FeatureCostTable.from_dict(cost_table_dict())


def experiments() -> dict[str, dict]:
    tiny_ga = {"population": 100, "generations": 100}
    out = {}
    for axis in "TOPS":
        out[f"tiny_axis_{axis}"] = {
            "kind": "axis_isolation", "axis": axis, "models": ["tiny_cnn", "tiny_gemm"],
            "accel": "tiny_inflex_0000", "objective": "runtime", "seed": 7, "mode": "exhaustive"}
        out[f"full_axis_{axis}"] = {
            "kind": "axis_isolation", "axis": axis, "models": ["toy_cnn", "toy_gemm"],
            "accel": "full_inflex_0000", "objective": "runtime", "seed": 7, "mode": "auto",
            "ga": tiny_ga}
    out["tiny_class_sweep"] = {
        "kind": "class_sweep", "models": ["tiny_cnn", "tiny_gemm"], "accel": "tiny_inflex_0000",
        "objective": "runtime", "seed": 7, "mode": "exhaustive"}
    out["buffer_sweep"] = {
        "kind": "buffer_sweep", "models": ["toy_cnn", "toy_gemm"], "accel": "full_inflex_0000",
        "sizes": [64 << i for i in range(8)], "objective": "runtime", "seed": 7, "mode": "exhaustive"}
    out["array_sweep"] = {
        "kind": "array_sweep", "models": ["toy_cnn", "toy_gemm"], "accel": "full_inflex_0000",
        "n_pes": [16, 64, 256, 1024, 4096, 16384], "objective": "runtime", "seed": 7, "mode": "exhaustive"}
    out["future_proof"] = {
        "kind": "future_proof", "design_model": "toy_cnn",
        "models": ["toy_cnn", "gemm_square", "gemm_tall_skinny", "gemv"],
        "variants": ["0000", "0010", "1111"], "accel": "full_inflex_0000",
        "objective": "runtime", "seed": 7, "mode": "auto", "ga": tiny_ga}
    return out


# ----------------------------------------------------------------- files

def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def fixture_files() -> dict[str, str]:
    """Relative path -> file content for every shipped fixture."""
    files = {}
    for name, make in MODELS.items():
        files[f"models/{name}.json"] = _dump(make().to_dict())
    for name, acc in accelerators().items():
        files[f"accels/{name}.json"] = _dump(acc.to_dict())
    files["cost_table.json"] = _dump(cost_table_dict())
    files["energy.json"] = _dump({"e_dram": 160, "e_buf": 6, "e_mac": 1})
    for name, exp in experiments().items():
        files[f"experiments/{name}.json"] = _dump(exp)
    return files


def write_fixtures(root: Path = FIXTURE_DIR) -> list[Path]:
    written = []
    for rel, text in fixture_files().items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        written.append(path)
    return written


@dataclass(frozen=True)
class Fixture:
    models: dict[str, Model]
    accelerators: dict[str, AcceleratorSpec]


def fixtures() -> Fixture:
    return Fixture({n: f() for n, f in MODELS.items()}, accelerators())


# ----------------------------------------------------------------- references

def resolve_model(ref, base_dir: Path | None = None) -> Model:
    """A model given inline, as a fixture name, or as a path."""
    if isinstance(ref, dict):
        return model_from_dict(ref)
    if not isinstance(ref, str):
        raise ValidationError(f"model reference must be a name, path or object, got {ref!r}")
    if ref in MODELS:
        return MODELS[ref]()
    return model_from_dict(read_json(_path(ref, base_dir)))


def resolve_accel(ref, base_dir: Path | None = None) -> AcceleratorSpec:
    if isinstance(ref, dict):
        return accel_from_dict(ref)
    if not isinstance(ref, str):
        raise ValidationError(f"accelerator reference must be a name, path or object, got {ref!r}")
    if ref in accelerators():
        return accelerators()[ref]
    return accel_from_dict(read_json(_path(ref, base_dir)))


def _path(ref: str, base_dir: Path | None) -> Path:
    p = Path(ref)
    if not p.is_absolute() and base_dir is not None and (base_dir / p).exists():
        return base_dir / p
    return p


__all__ = ["fixtures", "Fixture", "MODELS", "accelerators", "experiments", "resolve_model",
           "resolve_accel", "default_cost_table", "default_energy", "write_fixtures",
           "fixture_files", "SHAPE_BLOCKS"]


if __name__ == "__main__":  # pragma: no cover
    for p in write_fixtures(Path(sys.argv[1]) if len(sys.argv) > 1 else FIXTURE_DIR):
        print(p)
