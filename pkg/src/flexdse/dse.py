"""Design-space experiments: per-model MSE over accelerator variants.

Experiment kinds:

* ``axis_isolation``: InFlex / PartFlex / FullFlex on one axis.
* ``buffer_sweep``: FullFlex-1000 over buffer sizes.
* ``array_sweep``: FullFlex-0001 over PE counts.
* ``class_sweep``: all sixteen classes, fully flexible on every set bit.
* ``future_proof``: design one fixed configuration for a model, then
  compare it against flexible variants on other models.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .accel import (AXES, FULLFLEX, INFLEX, PARTFLEX, AcceleratorSpec, BufferConfig, FlexClass,
                    FlexConstraints, native_orders, native_parallel_dims)
from .cost import DEFAULT_ENERGY, OBJECTIVES, EnergyParams, evaluate
from .errors import ConsistencyError, ValidationError
from .ga import GaConfig, GeneSpace, run_ga, search
from .mapping import Mapping, buffer_verdict, clamp_baseline, clamp_tiles, footprint_of, parse_order
from .mapspace import feasible_size, stats, venn_report
from .oracle import EXHAUSTIVE_CAP, exhaustive_best
from .overhead import FeatureCostTable, overhead
from .report import RESULT_VERSION
from .workload import DIMS, Dim, Layer, Model, divisors

KINDS = ("axis_isolation", "buffer_sweep", "array_sweep", "class_sweep", "future_proof")
MODES = ("auto", "exhaustive", "ga")

# Partial-flexibility recipes.
PART_ORDERS = tuple(parse_order(o) for o in ("YXKCRS", "KCRSYX", "CYXRSK"))  # output/weight/input stationary
PART_PAIRS = ((Dim.K, Dim.C), (Dim.Y, Dim.X))
PART_RATIOS = (1, 1, 1)
SHAPE_BLOCKS = (("A", 16), ("B", 4))


# ----------------------------------------------------------------- variants

def variant_name(cls: FlexClass, degree: str, tag: str = "", suffix: str = "") -> str:
    parts = [degree] + ([tag] if tag else []) + [str(cls)]
    name = "-".join(parts)
    return f"{name}-{suffix}" if suffix else name


def make_variant(base: AcceleratorSpec, cls: str | FlexClass, partial: Sequence[str] = (),
                 shape_block: int | None = None, name: str | None = None) -> AcceleratorSpec:
    """Accelerator with ``base``'s resources and baseline but flexibility ``cls``.

    Axes listed in ``partial`` use the PartFlex recipe, other set bits are
    fully flexible and cleared bits stay pinned to the baseline.
    """
    cls = FlexClass.parse(cls)
    base_map = base.baseline
    buffer = BufferConfig(base.buffer.size)
    if cls.t and "T" in partial:
        buffer = BufferConfig(base.buffer.size, "hard", PART_RATIOS)
    order = "fixed"
    if cls.o:
        order = tuple(dict.fromkeys((base_map.order,) + PART_ORDERS)) if "O" in partial else "all"
    parallel = "fixed"
    if cls.p:
        parallel = tuple(dict.fromkeys((base_map.parallel,) + PART_PAIRS)) if "P" in partial else "all"
    shape = "fixed"
    if cls.s:
        shape = "all"
        if "S" in partial:
            if shape_block is None:
                raise ValidationError("PartFlex shape needs a block size")
            shape = shape_block
    cons = FlexConstraints("flexible" if cls.t else "fixed", order, parallel, shape)
    if name is None:
        degrees = {INFLEX} if str(cls) == "0000" else {PARTFLEX if a in partial else FULLFLEX
                                                       for a in AXES if cls.bit(a)}
        degree = PARTFLEX if PARTFLEX in degrees else degrees.pop()
        tag = ""
        if "S" in partial and cls.s:
            tag = dict((b, t) for t, b in SHAPE_BLOCKS).get(shape_block, f"b{shape_block}")
        name = variant_name(cls, degree, tag)
    return base.replace(name=name, buffer=buffer, flex_class=cls, constraints=cons)


def block_fits(base: AcceleratorSpec, b: int) -> bool:
    h, w = base.baseline.shape
    return base.n_pe // (b * b) >= 2 and h % b == 0 and w % b == 0


def axis_variants(base: AcceleratorSpec, axis: str) -> list[AcceleratorSpec]:
    bits = "".join("1" if a == axis else "0" for a in AXES)
    out = [make_variant(base, "0000")]
    if axis == "S":
        for tag, b in SHAPE_BLOCKS:
            if block_fits(base, b):
                out.append(make_variant(base, bits, partial=("S",), shape_block=b))
    else:
        out.append(make_variant(base, bits, partial=(axis,)))
    out.append(make_variant(base, bits))
    return out


def shrink_tiles_to_fit(tiles: Sequence[int], buffer: BufferConfig) -> tuple[int, ...]:
    tiles = list(tiles)
    while not buffer_verdict(footprint_of(tiles), buffer):
        d = max(range(6), key=lambda i: (tiles[i], -i))
        if tiles[d] == 1:
            raise ConsistencyError("buffer cannot hold a unit tile")
        tiles[d] = -(-tiles[d] // 2)
    return tuple(tiles)


def with_buffer(base: AcceleratorSpec, size: int) -> AcceleratorSpec:
    buf = base.buffer.with_size(size)
    tiles = shrink_tiles_to_fit(base.baseline.tiles, buf)
    return base.replace(buffer=buf, baseline=base.baseline.replace(tiles=tiles))


def square_shape(n_pe: int) -> tuple[int, int]:
    h = math.isqrt(n_pe)
    return h, n_pe // h


def with_n_pe(base: AcceleratorSpec, n_pe: int) -> AcceleratorSpec:
    return base.replace(n_pe=n_pe, baseline=base.baseline.replace(shape=square_shape(n_pe)))


# ----------------------------------------------------------------- solving

def layer_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def design_seed(seed: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(1,)).generate_state(1)[0])


@dataclass(frozen=True)
class Job:
    model: str
    variant: str
    layer_index: int
    layer: Layer
    accel: AcceleratorSpec
    objective: str
    mode: str
    ga: GaConfig
    seed: int
    energy: EnergyParams
    energy_adder: Fraction


def solve(job: Job) -> dict:
    """Best mapping for one layer on one variant, with its flexion stats."""
    layer, accel = job.layer, job.accel
    size = feasible_size(layer, accel)
    mode = job.mode
    if mode == "auto":
        mode = "exhaustive" if size <= EXHAUSTIVE_CAP else "ga"
    if mode == "exhaustive":
        m, rep = exhaustive_best(layer, accel, job.objective, job.energy, job.energy_adder)
        history = []
    else:
        cfg = job.ga.replace(seed=layer_seed(job.seed, job.layer_index), objective=job.objective)
        res = search(layer, accel, cfg, job.energy, job.energy_adder)
        m, rep, history = res.mapping, res.report, list(res.history)
    st = stats(layer, accel)
    return {
        "model": job.model, "variant": job.variant, "layer_index": job.layer_index,
        "layer": layer.name, "mode": mode, "feasible_size": size,
        "mapping": m.to_dict(), "cost": rep.to_dict(),
        "runtime": rep.runtime_cycles, "energy": rep.energy, "edp": rep.edp,
        "flexion": st.to_dict(), "venn": venn_report(layer, accel), "history": history,
    }


def run_jobs(jobs: list[Job], workers: int = 1) -> list[dict]:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(solve, jobs, chunksize=1))
    return [solve(j) for j in jobs]


# ----------------------------------------------------------------- experiments

@dataclass
class Experiment:
    kind: str
    models: list[Model]
    base: AcceleratorSpec
    objective: str = "runtime"
    seed: int = 0
    mode: str = "auto"
    ga: GaConfig = field(default_factory=GaConfig)
    axis: str | None = None
    sizes: list[int] = field(default_factory=list)
    n_pes: list[int] = field(default_factory=list)
    classes: list[str] = field(default_factory=list)
    design_model: Model | None = None
    variants: list[str] = field(default_factory=list)
    energy: EnergyParams = DEFAULT_ENERGY
    cost_table: FeatureCostTable | None = None
    config: dict = field(default_factory=dict)  # resolved, serialisable description

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"experiment kind must be one of {KINDS}")
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"objective must be one of {OBJECTIVES}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if not self.models:
            raise ValidationError("experiment needs at least one model")
        if self.kind == "axis_isolation" and self.axis not in AXES:
            raise ValidationError("axis_isolation needs 'axis' in T/O/P/S")
        if self.kind == "buffer_sweep" and not self.sizes:
            raise ValidationError("buffer_sweep needs 'sizes'")
        if self.kind == "array_sweep" and not self.n_pes:
            raise ValidationError("array_sweep needs 'n_pes'")
        if self.kind == "future_proof":
            if self.design_model is None:
                raise ValidationError("future_proof needs 'design_model'")
            if not self.variants:
                raise ValidationError("future_proof needs 'variants'")


def build_variants(exp: Experiment) -> tuple[list[AcceleratorSpec], str]:
    """Variant list plus the name of the normalisation baseline."""
    base = exp.base
    if exp.kind == "axis_isolation":
        vs = axis_variants(base, exp.axis)
        return vs, vs[0].name
    if exp.kind == "buffer_sweep":
        vs = [make_variant(with_buffer(base, s), "1000", name=f"FullFlex-1000-B{s}") for s in exp.sizes]
        return vs, vs[0].name
    if exp.kind == "array_sweep":
        vs = [make_variant(with_n_pe(base, n), "0001", name=f"FullFlex-0001-N{n}") for n in exp.n_pes]
        return vs, vs[0].name
    if exp.kind == "class_sweep":
        classes = exp.classes or [str(c) for c in FlexClass.all_classes()]
        vs = [make_variant(base, c) for c in classes]
        return vs, vs[0].name
    raise ValidationError(f"variants for {exp.kind} are built by the future-proof driver")


def _jobs_for(exp: Experiment, variants, models, energy_adders) -> list[Job]:
    jobs = []
    for model in models:
        for v in variants:
            for i, layer in enumerate(model.layers):
                jobs.append(Job(model.name, v.name, i, layer, v, exp.objective, exp.mode, exp.ga,
                                exp.seed, exp.energy, energy_adders[v.name]))
    return jobs


def _adders(exp: Experiment, variants) -> tuple[dict, dict]:
    adders, overheads = {}, {}
    for v in variants:
        if exp.cost_table is None:
            adders[v.name] = Fraction(0)
        else:
            oh = overhead(v, exp.cost_table)
            adders[v.name] = oh.energy_adders
            overheads[v.name] = oh.to_dict()
    return adders, overheads


def geomean(values: Sequence[Fraction]) -> float:
    return math.exp(sum(math.log(v) for v in values) / len(values)) if values else float("nan")


def assemble(exp: Experiment, variants, models, baseline: str, layer_records, overheads,
             extra: dict | None = None) -> dict:
    by_key: dict[tuple[str, str], list[dict]] = {}
    for rec in layer_records:
        by_key.setdefault((rec["model"], rec["variant"]), []).append(rec)
    records = []
    totals = {}
    for model in models:
        for v in variants:
            layers = sorted(by_key[(model.name, v.name)], key=lambda r: r["layer_index"])
            runtime = sum(r["runtime"] for r in layers)
            energy = sum((r["energy"] for r in layers), Fraction(0))
            totals[(model.name, v.name)] = (Fraction(runtime), energy, energy * runtime)
            records.append({"model": model.name, "variant": v.name, "layers": layers,
                            "total_runtime": runtime, "total_energy": energy,
                            "total_edp": energy * runtime})
    for rec in records:
        ref = totals[(rec["model"], baseline)]
        own = totals[(rec["model"], rec["variant"])]
        rec["normalized"] = {k: own[i] / ref[i] for i, k in enumerate(("runtime", "energy", "edp"))}
        rec["speedup"] = ref[0] / own[0]
    geo = {v.name: geomean([totals[(m.name, baseline)][0] / totals[(m.name, v.name)][0] for m in models])
           for v in variants}
    out = {
        "version": RESULT_VERSION,
        "kind": exp.kind,
        "experiment": exp.config,
        "baseline_variant": baseline,
        "variants": [v.name for v in variants],
        "models": [m.name for m in models],
        "accelerators": {v.name: v.to_dict() for v in variants},
        "overhead": overheads,
        "records": records,
        "geomean_speedup": geo,
    }
    if extra:
        out.update(extra)
    return out



def run_experiment(exp: Experiment, workers: int = 1) -> dict:
    if exp.kind == "future_proof":
        return future_proof(exp, workers)
    variants, baseline = build_variants(exp)
    adders, overheads = _adders(exp, variants)
    records = run_jobs(_jobs_for(exp, variants, exp.models, adders), workers)
    extra = {}
    if exp.kind == "array_sweep":
        extra["plateau"] = _plateaus(exp, variants, records)
    return assemble(exp, variants, exp.models, baseline, records, overheads, extra)


def _plateaus(exp, variants, records) -> dict:
    """Smallest PE count from which each model's total runtime stops improving."""
    runtime = {}
    for rec in records:
        key = (rec["model"], rec["variant"])
        runtime[key] = runtime.get(key, 0) + rec["runtime"]
    out = {}
    for model in exp.models:
        series = [runtime[(model.name, v.name)] for v in variants]
        start = len(series) - 1
        while start > 0 and series[start - 1] == series[-1]:
            start -= 1
        out[model.name] = {"n_pe": exp.n_pes[start], "runtime": series[-1],
                           "saturated": start < len(series) - 1}
    return out


# ----------------------------------------------------------------- future-proofing

def design_space(model: Model, base: AcceleratorSpec) -> GeneSpace:
    """One TOPS tuple shared by every layer, clamped per layer for tiles."""
    tile_values = tuple(tuple(sorted({v for l in model.layers for v in divisors(l.dims[d])}))
                        for d in DIMS)
    orders = tuple(native_orders(base.native_dims))
    native = native_parallel_dims(base.native_dims)
    pairs = tuple((a, b) for a in native for b in native if a != b)
    shapes = tuple((h, base.n_pe // h) for h in range(1, base.n_pe + 1))

    def fits(tiles) -> bool:
        if not buffer_verdict(footprint_of(tiles), base.buffer):
            return False
        return all(buffer_verdict(footprint_of(clamp_tiles(l, tiles), l.stride, l.kind), base.buffer)
                   for l in model.layers)

    return GeneSpace(tile_values, orders, pairs, shapes, fits)


def design_fixed(model: Model, base: AcceleratorSpec, cfg: GaConfig,
                 ep: EnergyParams = DEFAULT_ENERGY) -> tuple[Mapping, int, tuple]:
    """GA search for the fixed configuration minimising the model objective."""
    space = design_space(model, base)
    fixed = make_variant(base, "0000")

    def fitness(g) -> tuple:
        m = space.decode(g)
        acc = fixed.replace(baseline=m)
        total = 0
        for layer in model.layers:
            rep = evaluate(layer, acc, clamp_baseline(layer, acc), ep)
            total += rep.objective(cfg.objective)
        return total, m.key()

    res = run_ga(space, fitness, cfg)
    return space.decode(res.genome), res.score[0], res.history


def future_proof(exp: Experiment, workers: int = 1) -> dict:
    cfg = exp.ga.replace(seed=design_seed(exp.seed), objective=exp.objective)
    design, design_total, history = design_fixed(exp.design_model, exp.base, cfg, exp.energy)
    base = exp.base.replace(baseline=design)
    variants = []
    for cls in exp.variants:
        c = FlexClass.parse(cls)
        degree = INFLEX if str(c) == "0000" else FULLFLEX
        variants.append(make_variant(base, c, name=variant_name(c, degree, suffix="designOpt")))
    fixed_name = variant_name(FlexClass.parse("0000"), INFLEX, suffix="designOpt")
    if fixed_name not in {v.name for v in variants}:
        variants.insert(0, make_variant(base, "0000", name=fixed_name))
    adders, overheads = _adders(exp, variants)
    records = run_jobs(_jobs_for(exp, variants, exp.models, adders), workers)
    extra = {"design": {"model": exp.design_model.name, "mapping": design.to_dict(),
                        "objective_total": design_total, "history": list(history)}}
    return assemble(exp, variants, exp.models, fixed_name, records, overheads, extra)
