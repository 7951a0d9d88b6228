"""DNN layers as bounded six-dimensional loop nests.

Dimension naming follows the usual convolution convention:

    K: output channels      C: input channels
    Y, X: output rows/cols  R, S: filter rows/cols

GEMM layers are embedded into the same six loops (see :func:`embed_gemm`).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from pathlib import Path
from typing import Iterable

from .errors import ParseError, ValidationError


class Dim(IntEnum):
    K = 0
    C = 1
    Y = 2
    X = 3
    R = 4
    S = 5


DIMS: tuple[Dim, ...] = tuple(Dim)
DIM_NAMES: tuple[str, ...] = tuple(d.name for d in DIMS)

CONV2D = "CONV2D"
DWCONV = "DWCONV"
GEMM = "GEMM"
KINDS = (CONV2D, DWCONV, GEMM)

# GEMM (M, N, K) -> six loops.  "contraction" keeps the GEMM reduction on C;
# "literal" assigns (M, N, K) -> (K, C, Y) position by position.
GEMM_EMBEDDINGS = ("contraction", "literal")


def parse_dim(name: str | Dim) -> Dim:
    if isinstance(name, Dim):
        return name
    try:
        return Dim[name]
    except KeyError:
        raise ValidationError(f"unknown dimension {name!r}") from None


@dataclass(frozen=True)
class Layer:
    name: str
    dims: tuple[int, int, int, int, int, int]
    stride: int = 1
    kind: str = CONV2D

    def __post_init__(self):
        dims = tuple(int(v) for v in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) != 6:
            raise ValidationError(f"layer {self.name!r}: expected 6 dims, got {len(dims)}")
        if any(v < 1 for v in dims):
            raise ValidationError(f"layer {self.name!r}: all dimension sizes must be >= 1, got {dims}")
        if int(self.stride) < 1:
            raise ValidationError(f"layer {self.name!r}: stride must be >= 1")
        if self.kind not in KINDS:
            raise ValidationError(f"layer {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == GEMM:
            if dims[Dim.R] != 1 or dims[Dim.S] != 1 or (dims[Dim.Y] != 1 and dims[Dim.X] != 1):
                raise ValidationError(
                    f"layer {self.name!r}: GEMM layers need R=S=1 and one of Y/X equal to 1")
        if self.kind == DWCONV and dims[Dim.C] != 1:
            # channels of a depthwise layer live on K
            raise ValidationError(f"layer {self.name!r}: DWCONV layers carry channels on K; C must be 1")

    def __getitem__(self, d: Dim) -> int:
        return self.dims[d]

    @property
    def macs(self) -> int:
        if self.kind == DWCONV:
            return math.prod(self.dims[d] for d in DIMS if d != Dim.C)
        return math.prod(self.dims)

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        out.update(zip(DIM_NAMES, self.dims))
        out["stride"] = self.stride
        return out


@dataclass(frozen=True)
class Model:
    name: str
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValidationError(f"model {self.name!r} has no layers")

    def to_dict(self) -> dict:
        return {"name": self.name, "layers": [l.to_dict() for l in self.layers]}


def embed_gemm(m: int, n: int, k: int, name: str = "gemm", mode: str = "contraction") -> Layer:
    """Embed an ``M x K`` by ``K x N`` product into the six-loop nest.

    The default keeps the reduction on the channel loop: ``K_conv=M``,
    ``C=K`` and ``Y=N``.  ``mode="literal"`` instead maps ``(M, N, K)`` onto
    ``(K_conv, C, Y)`` in that order.
    """
    if min(m, n, k) < 1:
        raise ValidationError(f"GEMM sizes must be >= 1, got {(m, n, k)}")
    if mode == "contraction":
        dims = (m, k, n, 1, 1, 1)
    elif mode == "literal":
        dims = (m, n, k, 1, 1, 1)
    else:
        raise ValidationError(f"unknown GEMM embedding {mode!r}")
    return Layer(name=name, dims=dims, stride=1, kind=GEMM)


@lru_cache(maxsize=4096)
def _divisors(n: int) -> tuple[int, ...]:
    small, large = [], []
    i = 1
    while i * i <= n:
        if n % i == 0:
            small.append(i)
            if i != n // i:
                large.append(n // i)
        i += 1
    return tuple(small + large[::-1])


def divisors(n: int) -> list[int]:
    """All positive divisors of ``n`` in ascending order."""
    if n < 1:
        raise ValueError(f"divisors() needs n >= 1, got {n}")
    return list(_divisors(n))


def effective_dims(layer: Layer) -> frozenset[Dim]:
    return frozenset(d for d in DIMS if layer.dims[d] > 1)


# ---------------------------------------------------------------- loading

_LAYER_CONV_KEYS = {"name", "kind", "stride", *DIM_NAMES}
_LAYER_GEMM_KEYS = {"name", "kind", "M", "N", "K", "embedding"}


def _positive_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{what} must be an integer, got {value!r}")
    if value < 1:
        raise ValidationError(f"{what} must be >= 1, got {value}")
    return value


def layer_from_dict(obj: dict, index: int = 0) -> Layer:
    if not isinstance(obj, dict):
        raise ValidationError(f"layer #{index} must be an object")
    name = obj.get("name", f"layer{index}")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise ValidationError(f"layer {name!r}: unknown kind {kind!r}")
    if kind == GEMM and "M" in obj:
        unknown = set(obj) - _LAYER_GEMM_KEYS
        if unknown:
            raise ValidationError(f"layer {name!r}: unknown fields {sorted(unknown)}")
        for key in ("M", "N", "K"):
            if key not in obj:
                raise ValidationError(f"layer {name!r}: GEMM layer missing {key}")
        m, n, k = (_positive_int(obj[key], f"layer {name!r} {key}") for key in ("M", "N", "K"))
        return embed_gemm(m, n, k, name=name, mode=obj.get("embedding", "contraction"))
    unknown = set(obj) - _LAYER_CONV_KEYS
    if unknown:
        raise ValidationError(f"layer {name!r}: unknown fields {sorted(unknown)}")
    missing = [k for k in DIM_NAMES if k not in obj]
    if missing:
        raise ValidationError(f"layer {name!r}: missing dimensions {missing}")
    dims = tuple(_positive_int(obj[k], f"layer {name!r} {k}") for k in DIM_NAMES)
    stride = _positive_int(obj.get("stride", 1), f"layer {name!r} stride")
    return Layer(name=name, dims=dims, stride=stride, kind=kind)


def model_from_dict(obj) -> Model:
    if not isinstance(obj, dict):
        raise ValidationError("model document must be an object")
    unknown = set(obj) - {"name", "layers"}
    if unknown:
        raise ValidationError(f"model: unknown fields {sorted(unknown)}")
    layers = obj.get("layers")
    if not isinstance(layers, list):
        raise ValidationError("model: 'layers' must be a list")
    return Model(name=str(obj.get("name", "model")), layers=tuple(
        layer_from_dict(l, i) for i, l in enumerate(layers)))


def read_json(path: str | Path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_model(path: str | Path) -> Model:
    return model_from_dict(read_json(path))


def model_of(layers: Iterable[Layer], name: str = "model") -> Model:
    return Model(name=name, layers=tuple(layers))
