"""Desk-scale quantum data center simulator.

QRAM queries over classical and quantum data, unary-to-binary compression,
multi-party private quantum communication over a simulated network, a
distributed-sensing demo and a fault-tolerant resource estimator.
"""

from qdc.config import DEFAULT_TOLERANCES, Tolerances, make_rng, spawn
from qdc.errors import (
    ConfigurationError,
    DomainWarning,
    GateTargetError,
    InfeasibleError,
    LayoutError,
    PreconditionError,
    QdcError,
    ReconstructionError,
    ResourceError,
    SubspaceViolationError,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOLERANCES",
    "Tolerances",
    "make_rng",
    "spawn",
    "QdcError",
    "ConfigurationError",
    "DomainWarning",
    "GateTargetError",
    "InfeasibleError",
    "LayoutError",
    "PreconditionError",
    "ReconstructionError",
    "ResourceError",
    "SubspaceViolationError",
]
