"""Accelerator description: resources, flexibility class, constraints, baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from pathlib import Path
from typing import Union

from .errors import ConsistencyError, ValidationError
from .mapping import (Mapping, buffer_verdict, footprint_of, native_verdict, order_str,
                      parse_order)
from .workload import DIMS, Dim, parse_dim, read_json

AXES = ("T", "O", "P", "S")
INFLEX, PARTFLEX, FULLFLEX = "InFlex", "PartFlex", "FullFlex"


@dataclass(frozen=True)
class FlexClass:
    t: int
    o: int
    p: int
    s: int

    def __post_init__(self):
        for v in (self.t, self.o, self.p, self.s):
            if v not in (0, 1):
                raise ValidationError(f"flexibility bits must be 0 or 1, got {v!r}")

    @classmethod
    def parse(cls, text: "str | FlexClass") -> "FlexClass":
        if isinstance(text, FlexClass):
            return text
        if not isinstance(text, str) or len(text) != 4 or set(text) - {"0", "1"}:
            raise ValidationError(f"flexibility class must be a 4-bit string like '1010', got {text!r}")
        return cls(*(int(ch) for ch in text))

    def bit(self, axis: str) -> int:
        return getattr(self, axis.lower())

    def __str__(self) -> str:
        return f"{self.t}{self.o}{self.p}{self.s}"

    @staticmethod
    def all_classes() -> list["FlexClass"]:
        return [FlexClass.parse(f"{i:04b}") for i in range(16)]


def parse_fraction(value, what: str) -> Fraction:
    if isinstance(value, bool):
        raise ValidationError(f"{what} must be a number")
    try:
        if isinstance(value, float):
            return Fraction(value).limit_denominator(10**9)
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ValidationError(f"{what} must be a rational number, got {value!r}") from None


def fraction_to_json(x: Fraction):
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class BufferConfig:
    size: int | None  # None means unbounded
    partitioning: str = "soft"
    ratios: tuple[Fraction, Fraction, Fraction] | None = None

    def __post_init__(self):
        if self.size is not None and (isinstance(self.size, bool) or not isinstance(self.size, int)
                                      or self.size < 1):
            raise ValidationError(f"buffer size must be a positive int or null, got {self.size!r}")
        if self.partitioning not in ("soft", "hard"):
            raise ValidationError(f"buffer partitioning must be 'soft' or 'hard', got {self.partitioning!r}")
        if self.partitioning == "hard":
            if self.ratios is None or len(self.ratios) != 3:
                raise ValidationError("hard partitioning needs three ratios (weights, inputs, outputs)")
            ratios = tuple(parse_fraction(r, "buffer ratio") for r in self.ratios)
            if any(r <= 0 for r in ratios):
                raise ValidationError("hard partition ratios must be strictly positive")
            total = sum(ratios)
            object.__setattr__(self, "ratios", tuple(r / total for r in ratios))
        elif self.ratios is not None:
            raise ValidationError("ratios are only meaningful with hard partitioning")

    def shares(self) -> tuple[int, int, int]:
        """Per-tensor capacities (weights, inputs, outputs) in elements."""
        if self.size is None:
            return (math.inf,) * 3
        if self.partitioning == "soft":
            return (self.size,) * 3
        return tuple(math.floor(r * self.size) for r in self.ratios)

    def with_size(self, size: int | None) -> "BufferConfig":
        return BufferConfig(size, self.partitioning, self.ratios)

    def to_dict(self) -> dict:
        out = {"size": self.size, "partitioning": self.partitioning}
        if self.ratios is not None:
            out["ratios"] = [fraction_to_json(r) for r in self.ratios]
        return out

    @classmethod
    def from_dict(cls, obj) -> "BufferConfig":
        if not isinstance(obj, dict):
            raise ValidationError("buffer must be an object")
        unknown = set(obj) - {"size", "partitioning", "ratios"}
        if unknown:
            raise ValidationError(f"buffer: unknown fields {sorted(unknown)}")
        if "size" not in obj:
            raise ValidationError("buffer: missing 'size'")
        ratios = obj.get("ratios")
        return cls(obj["size"], obj.get("partitioning", "soft"),
                   None if ratios is None else tuple(ratios))


Pair = tuple[Dim, Dim]
OrderSpec = Union[str, tuple[tuple[Dim, ...], ...]]
ParallelSpec = Union[str, tuple[Pair, ...]]
ShapeSpec = Union[str, int]  # int = block size


@dataclass(frozen=True)
class FlexConstraints:
    tile: str = "fixed"  # fixed | flexible
    order: OrderSpec = "fixed"  # fixed | all | explicit permutations
    parallel: ParallelSpec = "fixed"  # fixed | all | explicit ordered pairs
    shape: ShapeSpec = "fixed"  # fixed | all | block size

    def __post_init__(self):
        if self.tile not in ("fixed", "flexible"):
            raise ValidationError(f"tile constraint must be 'fixed' or 'flexible', got {self.tile!r}")
        if not isinstance(self.order, str):
            orders = tuple(dict.fromkeys(parse_order(o) for o in self.order))
            object.__setattr__(self, "order", orders)
        elif self.order not in ("fixed", "all"):
            raise ValidationError(f"order constraint must be 'fixed', 'all' or a list, got {self.order!r}")
        if not isinstance(self.parallel, str):
            pairs = []
            for p in self.parallel:
                pair = tuple(parse_dim(d) for d in p)
                if len(pair) != 2 or pair[0] == pair[1]:
                    raise ValidationError(f"parallel pair must be two distinct dims, got {p!r}")
                pairs.append(pair)
            object.__setattr__(self, "parallel", tuple(dict.fromkeys(pairs)))
        elif self.parallel not in ("fixed", "all"):
            raise ValidationError(f"parallel constraint must be 'fixed', 'all' or a list, got {self.parallel!r}")
        if isinstance(self.shape, str):
            if self.shape not in ("fixed", "all"):
                raise ValidationError(f"shape constraint must be 'fixed', 'all' or a block, got {self.shape!r}")
        elif isinstance(self.shape, bool) or not isinstance(self.shape, int) or self.shape < 1:
            raise ValidationError(f"shape block size must be a positive int, got {self.shape!r}")

    def is_fixed(self, axis: str) -> bool:
        return {"T": self.tile, "O": self.order, "P": self.parallel, "S": self.shape}[axis] == "fixed"

    def order_allowed(self, order) -> bool:
        return self.order == "all" or (not isinstance(self.order, str) and tuple(order) in self.order)

    def parallel_allowed(self, pair) -> bool:
        return self.parallel == "all" or (not isinstance(self.parallel, str) and tuple(pair) in self.parallel)

    def shape_allowed(self, shape) -> bool:
        if self.shape == "all":
            return True
        if isinstance(self.shape, int):
            h, w = shape
            return h % self.shape == 0 and w % self.shape == 0
        return False

    def to_dict(self) -> dict:
        order = self.order if isinstance(self.order, str) else [order_str(o) for o in self.order]
        parallel = (self.parallel if isinstance(self.parallel, str)
                    else [[a.name, b.name] for a, b in self.parallel])
        shape = self.shape if isinstance(self.shape, str) else {"block": self.shape}
        return {"tile": self.tile, "order": order, "parallel": parallel, "shape": shape}

    @classmethod
    def from_dict(cls, obj) -> "FlexConstraints":
        if not isinstance(obj, dict):
            raise ValidationError("constraints must be an object")
        unknown = set(obj) - {"tile", "order", "parallel", "shape"}
        if unknown:
            raise ValidationError(f"constraints: unknown fields {sorted(unknown)}")
        shape = obj.get("shape", "fixed")
        if isinstance(shape, dict):
            if set(shape) != {"block"}:
                raise ValidationError("shape constraint object must be {\"block\": b}")
            shape = shape["block"]
        order = obj.get("order", "fixed")
        parallel = obj.get("parallel", "fixed")
        return cls(tile=obj.get("tile", "fixed"),
                   order=order if isinstance(order, str) else tuple(order),
                   parallel=parallel if isinstance(parallel, str) else tuple(tuple(p) for p in parallel),
                   shape=shape)


def native_orders(native_dims: int) -> list[tuple[Dim, ...]]:
    """Full permutations a native operator can sequence, lexicographic by dim index."""
    perms = permutations(DIMS)
    if native_dims == 3:
        return [p for p in perms if set(p[:3]) == {Dim.X, Dim.R, Dim.S}]
    return list(perms)


def native_parallel_dims(native_dims: int) -> tuple[Dim, ...]:
    return DIMS if native_dims == 6 else (Dim.K, Dim.C, Dim.Y)


@dataclass(frozen=True)
class AcceleratorSpec:
    name: str
    n_pe: int
    buffer: BufferConfig
    bandwidth: Fraction
    flex_class: FlexClass
    constraints: FlexConstraints
    baseline: Mapping
    native_dims: int = 6
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        if isinstance(self.n_pe, bool) or not isinstance(self.n_pe, int) or self.n_pe < 1:
            raise ValidationError(f"n_pe must be a positive int, got {self.n_pe!r}")
        bw = parse_fraction(self.bandwidth, "bandwidth")
        if bw <= 0:
            raise ValidationError("bandwidth must be positive")
        object.__setattr__(self, "bandwidth", bw)
        object.__setattr__(self, "flex_class", FlexClass.parse(self.flex_class))
        if self.native_dims not in (3, 6):
            raise ValidationError(f"native_dims must be 3 or 6, got {self.native_dims!r}")
        self._check_consistency()

    # -- validation -------------------------------------------------------
    def _check_consistency(self):
        cls, cons, base = self.flex_class, self.constraints, self.baseline
        for axis in AXES:
            if bool(cls.bit(axis)) == cons.is_fixed(axis):
                state = "fixed" if cons.is_fixed(axis) else "flexible"
                raise ConsistencyError(
                    f"{self.name}: class bit {axis}={cls.bit(axis)} but {axis} constraint is {state}")
        if isinstance(cons.order, tuple):
            if len(cons.order) < 2:
                raise ConsistencyError(f"{self.name}: order flexibility needs more than one allowed order")
            if base.order not in cons.order:
                raise ConsistencyError(f"{self.name}: allowed orders must contain the baseline order")
        if isinstance(cons.parallel, tuple):
            if len(cons.parallel) < 2:
                raise ConsistencyError(f"{self.name}: parallel flexibility needs more than one allowed pair")
            if base.parallel not in cons.parallel:
                raise ConsistencyError(f"{self.name}: allowed pairs must contain the baseline pair")
        if isinstance(cons.shape, int):
            b = cons.shape
            if self.n_pe // (b * b) < 2:
                raise ConsistencyError(f"{self.name}: block {b} admits fewer than two shapes on {self.n_pe} PEs")
            if not cons.shape_allowed(base.shape):
                raise ConsistencyError(f"{self.name}: baseline shape {base.shape} is not built from {b}x{b} blocks")
        if cls.t and cons.tile == "flexible" and self.buffer.size is not None and self.buffer.size < 3:
            raise ConsistencyError(f"{self.name}: buffer too small to hold any tile")
        # baseline must be a point of the fully flexible space with these resources
        if base.shape[0] * base.shape[1] > self.n_pe:
            raise ConsistencyError(f"{self.name}: baseline shape {base.shape} exceeds {self.n_pe} PEs")
        if not buffer_verdict(footprint_of(base.tiles), self.buffer):
            raise ConsistencyError(f"{self.name}: baseline tiles {base.tiles} do not fit the buffer")
        if not native_verdict(self, base):
            raise ConsistencyError(f"{self.name}: baseline uses dims outside the native operator")
        if cls.o and cons.order == "all" and base.order not in self.native_order_set():
            raise ConsistencyError(f"{self.name}: baseline order not sequenceable natively")

    # -- accessors ----------------------------------------------------------
    def degree(self, axis: str) -> str:
        if not self.flex_class.bit(axis):
            return INFLEX
        cons = self.constraints
        if axis == "T":
            return PARTFLEX if self.buffer.partitioning == "hard" else FULLFLEX
        value = {"O": cons.order, "P": cons.parallel, "S": cons.shape}[axis]
        return FULLFLEX if value == "all" else PARTFLEX

    def native_order_set(self) -> frozenset:
        key = ("native_orders",)
        if key not in self._cache:
            self._cache[key] = frozenset(native_orders(self.native_dims))
        return self._cache[key]

    def replace(self, **changes) -> "AcceleratorSpec":
        fields = dict(name=self.name, n_pe=self.n_pe, buffer=self.buffer, bandwidth=self.bandwidth,
                      flex_class=self.flex_class, constraints=self.constraints,
                      baseline=self.baseline, native_dims=self.native_dims)
        fields.update(changes)
        return AcceleratorSpec(**fields)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_pe": self.n_pe,
            "buffer": self.buffer.to_dict(),
            "bandwidth": fraction_to_json(self.bandwidth),
            "native_dims": self.native_dims,
            "flex_class": str(self.flex_class),
            "constraints": self.constraints.to_dict(),
            "baseline": self.baseline.to_dict(),
        }


_ACCEL_KEYS = {"name", "n_pe", "buffer", "bandwidth", "native_dims", "flex_class", "constraints", "baseline"}


def accel_from_dict(obj) -> AcceleratorSpec:
    if not isinstance(obj, dict):
        raise ValidationError("accelerator document must be an object")
    unknown = set(obj) - _ACCEL_KEYS
    if unknown:
        raise ValidationError(f"accelerator: unknown fields {sorted(unknown)}")
    missing = sorted({"n_pe", "buffer", "bandwidth", "flex_class", "baseline"} - set(obj))
    if missing:
        raise ValidationError(f"accelerator: missing fields {missing}")
    return AcceleratorSpec(
        name=str(obj.get("name", "accel")),
        n_pe=obj["n_pe"],
        buffer=BufferConfig.from_dict(obj["buffer"]),
        bandwidth=obj["bandwidth"],
        native_dims=obj.get("native_dims", 6),
        flex_class=FlexClass.parse(obj["flex_class"]),
        constraints=FlexConstraints.from_dict(obj.get("constraints", {})),
        baseline=Mapping.from_dict(obj["baseline"]),
    )


def load_accel(path: str | Path) -> AcceleratorSpec:
    return accel_from_dict(read_json(path))


def class_of(spec: AcceleratorSpec) -> FlexClass:
    return spec.flex_class


__all__ = [
    "AXES", "INFLEX", "PARTFLEX", "FULLFLEX", "FlexClass", "BufferConfig", "FlexConstraints",
    "AcceleratorSpec", "accel_from_dict", "load_accel", "class_of", "native_orders",
    "native_parallel_dims",
]
