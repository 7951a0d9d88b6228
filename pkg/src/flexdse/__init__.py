"""Flexibility-aware map-space and design-space exploration for DNN accelerators."""
from .accel import AcceleratorSpec, BufferConfig, FlexClass, FlexConstraints
from .cost import EnergyParams, evaluate
from .errors import (ConsistencyError, FlexError, GuardExceeded, InfeasibleSpace, ParseError,
                     SpaceTooLarge, ValidationError)
from .mapping import Mapping, footprint, is_legal
from .mapspace import enumerate_space, stats
from .workload import Dim, Layer, Model, embed_gemm

__version__ = "0.1.0"

__all__ = [
    "AcceleratorSpec", "BufferConfig", "FlexClass", "FlexConstraints", "EnergyParams", "evaluate",
    "ConsistencyError", "FlexError", "GuardExceeded", "InfeasibleSpace", "ParseError",
    "SpaceTooLarge", "ValidationError", "Mapping", "footprint", "is_legal", "enumerate_space",
    "stats", "Dim", "Layer", "Model", "embed_gemm", "__version__",
]
