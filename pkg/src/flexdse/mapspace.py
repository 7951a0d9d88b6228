"""Exact counting of workload, hardware and feasible map spaces, plus flexion.

Every axis exposes a *canonical choice list*: the feasible values for one
layer on one accelerator after removing choices that cannot change any cost
(for example two loop orders that only differ in where unit-extent loops sit).
Counting is enumeration: the ``a_count`` of an axis is the length of its list,
and search code walks the same lists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .accel import (AXES, INFLEX, AcceleratorSpec, BufferConfig, native_orders,
                    native_parallel_dims)
from .mapping import Mapping, buffer_verdict, clamp_tiles, footprint_of
from .workload import DIMS, DWCONV, Dim, Layer, divisors, effective_dims

ENUMERATION_CAP = 10**6
_CHUNK = 2_000_000


# ------------------------------------------------------------------ tiles

def fit_mask(tiles: np.ndarray, stride: int, kind: str, buffer: BufferConfig) -> np.ndarray:
    """Vectorised buffer-fit test over an ``(n, 6)`` array of tile tuples."""
    k, c, y, x, r, s = (tiles[:, i] for i in range(6))
    rows = (y - 1) * stride + r
    cols = (x - 1) * stride + s
    if kind == DWCONV:
        w, i = k * r * s, k * rows * cols
    else:
        w, i = k * c * r * s, c * rows * cols
    o = k * y * x
    if buffer.size is None:
        return np.ones(len(tiles), dtype=bool)
    if buffer.partitioning == "soft":
        return (w + i + o) <= buffer.size
    sw, si, so = buffer.shares()
    return (w <= sw) & (i <= si) & (o <= so)


def _factor_tuples(layer: Layer):
    """Yield ``(n, 6)`` chunks of every factor tile tuple in lexicographic order."""
    divs = [np.asarray(divisors(layer.dims[d]), dtype=np.int64) for d in DIMS]
    inner = divs[1:]
    inner_grid = np.stack([g.ravel() for g in np.meshgrid(*inner, indexing="ij")], axis=1)
    per_chunk = max(1, _CHUNK // len(inner_grid))
    for start in range(0, len(divs[0]), per_chunk):
        ks = divs[0][start:start + per_chunk]
        block = np.empty((len(ks) * len(inner_grid), 6), dtype=np.int64)
        block[:, 0] = np.repeat(ks, len(inner_grid))
        block[:, 1:] = np.tile(inner_grid, (len(ks), 1))
        yield block


def fitting_tiles(layer: Layer, buffer: BufferConfig) -> np.ndarray:
    """All factor tile tuples of ``layer`` that fit ``buffer`` (lexicographic)."""
    parts = [blk[fit_mask(blk, layer.stride, layer.kind, buffer)] for blk in _factor_tuples(layer)]
    return np.concatenate(parts) if parts else np.empty((0, 6), dtype=np.int64)


def count_fitting(layer: Layer, buffer: BufferConfig) -> int:
    return sum(int(fit_mask(blk, layer.stride, layer.kind, buffer).sum()) for blk in _factor_tuples(layer))


@lru_cache(maxsize=1024)
def tile_choices(layer: Layer, accel: AcceleratorSpec) -> tuple[tuple[int, ...], ...]:
    if not accel.flex_class.t:
        clamped = clamp_tiles(layer, accel.baseline.tiles)
        fits = buffer_verdict(footprint_of(clamped, layer.stride, layer.kind), accel.buffer)
        return (clamped,) if fits else ()
    return tuple(tuple(int(v) for v in row) for row in fitting_tiles(layer, accel.buffer))


# ------------------------------------------------------------------ orders

def project(order, dims) -> tuple[Dim, ...]:
    return tuple(d for d in order if d in dims)


def allowed_orders(accel: AcceleratorSpec) -> list[tuple[Dim, ...]]:
    cons = accel.constraints
    if not accel.flex_class.o:
        return [accel.baseline.order]
    if cons.order == "all":
        return native_orders(accel.native_dims)
    native = accel.native_order_set()
    return [o for o in cons.order if o in native]


def _dedupe_orders(orders, eff) -> list[tuple[Dim, ...]]:
    reps: dict[tuple, tuple] = {}
    for o in orders:
        key = project(o, eff)
        if key not in reps or o < reps[key]:
            reps[key] = o
    return sorted(reps.values())


@lru_cache(maxsize=1024)
def order_choices(layer: Layer, accel: AcceleratorSpec) -> tuple[tuple[Dim, ...], ...]:
    """One representative full permutation per distinct effective-dim ordering."""
    if not accel.flex_class.o:
        return (accel.baseline.order,)
    return tuple(_dedupe_orders(allowed_orders(accel), effective_dims(layer)))


# ------------------------------------------------------------------ parallelism

def allowed_pairs(accel: AcceleratorSpec) -> list[tuple[Dim, Dim]]:
    cons = accel.constraints
    if not accel.flex_class.p:
        return [accel.baseline.parallel]
    native = native_parallel_dims(accel.native_dims)
    if cons.parallel == "all":
        return [(a, b) for a in native for b in native if a != b]
    return [p for p in cons.parallel if p[0] in native and p[1] in native]


@lru_cache(maxsize=1024)
def parallel_choices(layer: Layer, accel: AcceleratorSpec) -> tuple[tuple[Dim, Dim], ...]:
    if not accel.flex_class.p:
        return (accel.baseline.parallel,)
    eff = effective_dims(layer)
    pairs = sorted(p for p in allowed_pairs(accel) if p[0] in eff and p[1] in eff)
    # a layer with fewer than two usable dims keeps the baseline pair
    return tuple(pairs) if pairs else (accel.baseline.parallel,)


# ------------------------------------------------------------------ shapes

def hardware_shapes(accel: AcceleratorSpec) -> list[tuple[int, int]]:
    """Logical array shapes the hardware can form, indexed by ascending row count."""
    n = accel.n_pe
    cons = accel.constraints
    if not accel.flex_class.s:
        return [accel.baseline.shape]
    if cons.shape == "all":
        return [(h, n // h) for h in range(1, n + 1)]
    b = cons.shape
    return [(k * b, b * (n // (k * b * b))) for k in range(1, n // (b * b) + 1)]


def max_extent(layer: Layer) -> int:
    return max(layer.dims)


@lru_cache(maxsize=1024)
def shape_choices(layer: Layer, accel: AcceleratorSpec) -> tuple[tuple[int, int], ...]:
    shapes = hardware_shapes(accel)
    if not accel.flex_class.s:
        return tuple(shapes)
    # rows beyond the largest loop extent only shrink the columns
    return tuple(shapes[:min(max_extent(layer), len(shapes))])


# ------------------------------------------------------------------ counts

@dataclass(frozen=True)
class AxisCounts:
    axis: str
    degree: str
    w_count: int  # |W^w|: workload-only choices
    a_count: int  # |A^w|: feasible on this accelerator
    cw_count: int  # |C ∩ W^w|: feasible on the fully flexible accelerator
    c_count: int | None  # |C_X|: hardware-potential choices (None = unbounded)
    a_hw: int | None  # |A_X|: choices the target hardware supports
    hw_flexion: Fraction
    wl_flexion: Fraction

    def to_dict(self) -> dict:
        return {
            "axis": self.axis, "degree": self.degree,
            "w_count": self.w_count, "a_count": self.a_count, "cw_count": self.cw_count,
            "c_count": self.c_count, "a_hw": self.a_hw,
            "hw_flexion": self.hw_flexion, "wl_flexion": self.wl_flexion,
        }


def _ratio(num, den) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def tile_hw_counts(accel: AcceleratorSpec) -> tuple[int | None, int | None, Fraction]:
    """Hardware-level tile-allocation counts ``(|C_X|, |A_X|, H-F)``.

    An allocation is a positive (weights, inputs, outputs) triple.  A soft
    buffer of ``S`` elements admits ``C(S, 3)`` of them; a hard buffer admits
    the product of its per-tensor shares.
    """
    buf = accel.buffer
    if buf.size is None:
        if not accel.flex_class.t:
            return None, 1, Fraction(0)
        if buf.partitioning == "soft":
            return None, None, Fraction(1)
        return None, None, 6 * math.prod(buf.ratios)
    c = math.comb(buf.size, 3)
    if not accel.flex_class.t:
        a = 1
    elif buf.partitioning == "soft":
        a = c
    else:
        a = math.prod(buf.shares())
    return c, a, _ratio(a, c)


def count_tiles(layer: Layer, accel: AcceleratorSpec) -> AxisCounts:
    w = math.prod(len(divisors(layer.dims[d])) for d in DIMS)
    a = len(tile_choices(layer, accel))
    cw = count_fitting(layer, BufferConfig(accel.buffer.size))
    c, a_hw, hf = tile_hw_counts(accel)
    return AxisCounts("T", accel.degree("T"), w, a, cw, c, a_hw, hf, _ratio(a, w))


def count_orders(layer: Layer, accel: AcceleratorSpec) -> AxisCounts:
    eff = effective_dims(layer)
    w = math.factorial(len(eff))
    c = math.factorial(accel.native_dims)
    a_hw = len(allowed_orders(accel))
    cw = len({project(o, eff) for o in native_orders(accel.native_dims)})
    a = len(order_choices(layer, accel))
    return AxisCounts("O", accel.degree("O"), w, a, cw, c, a_hw, _ratio(a_hw, c), _ratio(a, w))


def count_parallel(layer: Layer, accel: AcceleratorSpec) -> AxisCounts:
    eff = effective_dims(layer)
    m = len(eff)
    w = max(1, m * (m - 1))
    native = native_parallel_dims(accel.native_dims)
    c = len(native) * (len(native) - 1)
    a_hw = len(allowed_pairs(accel))
    usable = [d for d in native if d in eff]
    cw = max(1, len(usable) * (len(usable) - 1))
    a = len(parallel_choices(layer, accel))
    return AxisCounts("P", accel.degree("P"), w, a, cw, c, a_hw, _ratio(a_hw, c), _ratio(a, w))


def count_shapes(accel: AcceleratorSpec, layer: Layer | None = None) -> AxisCounts:
    """Shape-axis counts; without a layer the workload side is left unbounded."""
    n = accel.n_pe
    a_hw = len(hardware_shapes(accel))
    if layer is None:
        w, a, cw = n, a_hw, n
    else:
        w = max_extent(layer)
        a = len(shape_choices(layer, accel))
        cw = min(w, n)
    return AxisCounts("S", accel.degree("S"), w, a, cw, n, a_hw, _ratio(a_hw, n), _ratio(a, w))


@dataclass(frozen=True)
class MapSpaceStats:
    layer: str
    per_axis: dict[str, AxisCounts]
    combined_w: int
    combined_a: int
    combined_cw: int
    combined_wf: Fraction
    exact: bool

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "per_axis": {k: v.to_dict() for k, v in self.per_axis.items()},
            "combined_w": self.combined_w, "combined_a": self.combined_a,
            "combined_cw": self.combined_cw, "combined_wf": self.combined_wf,
            "exact": self.exact,
        }


def axis_counts(layer: Layer, accel: AcceleratorSpec) -> dict[str, AxisCounts]:
    return {
        "T": count_tiles(layer, accel),
        "O": count_orders(layer, accel),
        "P": count_parallel(layer, accel),
        "S": count_shapes(accel, layer),
    }


def feasible_size(layer: Layer, accel: AcceleratorSpec) -> int:
    """``|A^w|`` as the product of the canonical per-axis lists."""
    return (len(tile_choices(layer, accel)) * len(order_choices(layer, accel))
            * len(parallel_choices(layer, accel)) * len(shape_choices(layer, accel)))


def stats(layer: Layer, accel: AcceleratorSpec, cap: int = ENUMERATION_CAP) -> MapSpaceStats:
    per_axis = axis_counts(layer, accel)
    combined_w = math.prod(c.w_count for c in per_axis.values())
    combined_cw = math.prod(c.cw_count for c in per_axis.values())
    # Legality never couples two axes, so the joint feasible set is the
    # Cartesian product of the per-axis lists.  It is reported as exact when
    # the joint space is small enough to be enumerated for cross-checking.
    combined_a = feasible_size(layer, accel)
    return MapSpaceStats(layer.name, per_axis, combined_w, combined_a, combined_cw,
                         _ratio(combined_a, combined_w), combined_w <= cap)


def enumerate_space(layer: Layer, accel: AcceleratorSpec):
    """Yield every mapping of the canonical feasible space."""
    tiles = tile_choices(layer, accel)
    orders = order_choices(layer, accel)
    pairs = parallel_choices(layer, accel)
    shapes = shape_choices(layer, accel)
    for t in tiles:
        for o in orders:
            for p in pairs:
                for s in shapes:
                    yield Mapping(t, o, p, s)


def venn_report(layer: Layer, accel: AcceleratorSpec) -> dict:
    st = stats(layer, accel)
    rows = {axis: {"W": c.w_count, "A&W": c.a_count, "C&W": c.cw_count}
            for axis, c in st.per_axis.items()}
    rows["combined"] = {"W": st.combined_w, "A&W": st.combined_a, "C&W": st.combined_cw}
    return rows


__all__ = [
    "AXES", "INFLEX", "AxisCounts", "MapSpaceStats", "ENUMERATION_CAP", "count_tiles", "count_orders",
    "count_parallel", "count_shapes", "stats", "venn_report", "tile_choices", "order_choices",
    "parallel_choices", "shape_choices", "hardware_shapes", "enumerate_space", "feasible_size",
    "fitting_tiles", "count_fitting", "tile_hw_counts",
]
