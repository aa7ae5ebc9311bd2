"""Generate, evolve and quantify bipartite states with zero entanglement and maximal discord."""

__version__ = "0.1.0"

from .correlations import (
    CorrelationReport,
    MdmsParams,
    concurrence,
    discord_2q,
    mdms_state,
    mutual_information,
    purify,
)
from .qmath import DensityMatrix, StateVector, partial_trace, partial_transpose, tensor, von_neumann_entropy

__all__ = [
    "CorrelationReport",
    "DensityMatrix",
    "MdmsParams",
    "StateVector",
    "concurrence",
    "discord_2q",
    "mdms_state",
    "mutual_information",
    "partial_trace",
    "partial_transpose",
    "purify",
    "tensor",
    "von_neumann_entropy",
]
