"""Control/structure co-design toolkit for flexible spacecraft.

Models a multi-body spacecraft as interconnected two-port flexible
substructure blocks with parametric uncertainty, tunes a structured
attitude controller against mixed H2/H-infinity requirements, and runs
distributed (swarm-nested) and monolithic co-design drivers with
worst-case validation and report emission.
"""

__version__ = "0.1.0"

from .statespace import (
    AlgebraicLoopError,
    PortError,
    StateSpace,
    interconnect,
    reduce_minimal,
    stable,
)
from .norms import dc_gain, frequency_response, h2_norm, hinf_norm

__all__ = [
    "AlgebraicLoopError",
    "PortError",
    "StateSpace",
    "interconnect",
    "reduce_minimal",
    "stable",
    "dc_gain",
    "frequency_response",
    "h2_norm",
    "hinf_norm",
    "__version__",
]
