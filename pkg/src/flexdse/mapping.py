"""Mappings (T, O, P, S points), per-tensor tile footprints and legality."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple, Sequence

from .errors import ValidationError
from .workload import DIM_NAMES, DIMS, DWCONV, Dim, Layer, divisors, parse_dim

if TYPE_CHECKING:  # pragma: no cover
    from .accel import AcceleratorSpec


@dataclass(frozen=True)
class Mapping:
    tiles: tuple[int, int, int, int, int, int]
    order: tuple[Dim, Dim, Dim, Dim, Dim, Dim]  # outermost -> innermost
    parallel: tuple[Dim, Dim]  # (rows, columns)
    shape: tuple[int, int]  # (h, w)

    def __post_init__(self):
        tiles = tuple(int(t) for t in self.tiles)
        order = tuple(parse_dim(d) for d in self.order)
        parallel = tuple(parse_dim(d) for d in self.parallel)
        shape = tuple(int(v) for v in self.shape)
        object.__setattr__(self, "tiles", tiles)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "parallel", parallel)
        object.__setattr__(self, "shape", shape)
        if len(tiles) != 6 or any(t < 1 for t in tiles):
            raise ValidationError(f"mapping tiles must be six positive ints, got {tiles}")
        if sorted(order) != list(DIMS):
            raise ValidationError(f"mapping order must be a permutation of the six dims, got {order}")
        if len(parallel) != 2 or parallel[0] == parallel[1]:
            raise ValidationError(f"parallel dims must be two distinct dims, got {parallel}")
        if len(shape) != 2 or min(shape) < 1:
            raise ValidationError(f"array shape must be two positive ints, got {shape}")

    def replace(self, **changes) -> "Mapping":
        fields = dict(tiles=self.tiles, order=self.order, parallel=self.parallel, shape=self.shape)
        fields.update(changes)
        return Mapping(**fields)

    def to_dict(self) -> dict:
        return {
            "tiles": dict(zip(DIM_NAMES, self.tiles)),
            "order": [d.name for d in self.order],
            "parallel": [d.name for d in self.parallel],
            "shape": list(self.shape),
        }

    def key(self) -> str:
        """Canonical serialization; used for deterministic tie-breaking."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj) -> "Mapping":
        if not isinstance(obj, dict):
            raise ValidationError("mapping must be an object")
        unknown = set(obj) - {"tiles", "order", "parallel", "shape"}
        if unknown:
            raise ValidationError(f"mapping: unknown fields {sorted(unknown)}")
        try:
            tiles_obj = obj["tiles"]
            if isinstance(tiles_obj, dict):
                if set(tiles_obj) != set(DIM_NAMES):
                    raise ValidationError(f"mapping tiles need exactly {list(DIM_NAMES)}")
                tiles = tuple(tiles_obj[n] for n in DIM_NAMES)
            else:
                tiles = tuple(tiles_obj)
            if any(isinstance(t, bool) or not isinstance(t, int) for t in tiles):
                raise ValidationError(f"mapping tiles must be integers, got {tiles}")
            return cls(tiles=tiles, order=tuple(obj["order"]),
                       parallel=tuple(obj["parallel"]), shape=tuple(obj["shape"]))
        except KeyError as exc:
            raise ValidationError(f"mapping missing field {exc.args[0]!r}") from None
        except TypeError as exc:
            raise ValidationError(f"malformed mapping: {exc}") from None


def order_str(order: Sequence[Dim]) -> str:
    return "".join(Dim(d).name for d in order)


def parse_order(text: str | Sequence) -> tuple[Dim, ...]:
    items = list(text) if isinstance(text, str) else list(text)
    order = tuple(parse_dim(d) for d in items)
    if sorted(order) != list(DIMS):
        raise ValidationError(f"order must be a permutation of KCYXRS, got {text!r}")
    return order


class TileFootprint(NamedTuple):
    weights: int
    inputs: int
    outputs: int

    @property
    def total(self) -> int:
        return self.weights + self.inputs + self.outputs


def footprint_of(tiles: Sequence[int], stride: int = 1, kind: str = "CONV2D") -> TileFootprint:
    """Closed-form footprint without checking against a layer's bounds."""
    k, c, y, x, r, s = tiles
    in_rows = (y - 1) * stride + r
    in_cols = (x - 1) * stride + s
    if kind == DWCONV:
        return TileFootprint(k * r * s, k * in_rows * in_cols, k * y * x)
    return TileFootprint(k * c * r * s, c * in_rows * in_cols, k * y * x)


def footprint(layer: Layer, tiles: Sequence[int]) -> TileFootprint:
    tiles = tuple(tiles)
    for d, t in zip(DIMS, tiles):
        if not 1 <= t <= layer.dims[d]:
            raise ValidationError(f"tile {d.name}={t} outside 1..{layer.dims[d]} for layer {layer.name!r}")
    return footprint_of(tiles, layer.stride, layer.kind)


class Verdict(NamedTuple):
    ok: bool
    reason: str = "ok"

    def __bool__(self) -> bool:
        return self.ok


LEGAL = Verdict(True)
GEMM_NATIVE_DIMS = frozenset({Dim.K, Dim.C, Dim.Y})


def buffer_verdict(fp: TileFootprint, buffer) -> Verdict:
    if buffer.size is None:
        return LEGAL
    if buffer.partitioning == "soft":
        return LEGAL if fp.total <= buffer.size else Verdict(False, "buffer(soft)")
    shares = buffer.shares()
    for name, need, cap in zip(("weights", "inputs", "outputs"), fp, shares):
        if need > cap:
            return Verdict(False, f"buffer(hard:{name})")
    return LEGAL


def native_verdict(accel: "AcceleratorSpec", m: Mapping) -> Verdict:
    if accel.native_dims == 3:
        if not set(m.parallel) <= GEMM_NATIVE_DIMS:
            return Verdict(False, "native dims")
        if set(m.order[:3]) != {Dim.X, Dim.R, Dim.S}:
            return Verdict(False, "native dims")
    return LEGAL


def clamp_tiles(layer: Layer, tiles: Sequence[int]) -> tuple[int, ...]:
    """Largest divisor of each dimension not exceeding the requested tile."""
    out = []
    for d, t in zip(DIMS, tiles):
        out.append(max(v for v in divisors(layer.dims[d]) if v <= t))
    return tuple(out)


def clamp_baseline(layer: Layer, accel: "AcceleratorSpec") -> Mapping:
    return accel.baseline.replace(tiles=clamp_tiles(layer, accel.baseline.tiles))


def is_legal(layer: Layer, accel: "AcceleratorSpec", m: Mapping) -> Verdict:
    # (1) factor tiles
    for d in DIMS:
        if m.tiles[d] > layer.dims[d] or layer.dims[d] % m.tiles[d]:
            return Verdict(False, "factor")
    # (2) buffer fit
    v = buffer_verdict(footprint_of(m.tiles, layer.stride, layer.kind), accel.buffer)
    if not v:
        return v
    # (3) array size
    if m.shape[0] * m.shape[1] > accel.n_pe:
        return Verdict(False, "array")
    cls, cons = accel.flex_class, accel.constraints
    # (4) pinned axes
    if not cls.t and m.tiles != clamp_tiles(layer, accel.baseline.tiles):
        return Verdict(False, "tile fixed")
    if not cls.o and m.order != accel.baseline.order:
        return Verdict(False, "order fixed")
    if not cls.p and m.parallel != accel.baseline.parallel:
        return Verdict(False, "parallel fixed")
    if not cls.s and m.shape != accel.baseline.shape:
        return Verdict(False, "shape fixed")
    # (5) partial-flexibility sets
    if cls.o and not cons.order_allowed(m.order):
        return Verdict(False, "order not allowed")
    if cls.p and not cons.parallel_allowed(m.parallel):
        return Verdict(False, "parallel not allowed")
    if cls.s and not cons.shape_allowed(m.shape):
        return Verdict(False, "shape not allowed")
    # (6) native operator dims
    return native_verdict(accel, m)
