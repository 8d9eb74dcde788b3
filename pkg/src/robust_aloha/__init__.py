"""Impulse-noise removal by sparse + low-rank decomposition of Hankel-lifted patches."""

from .hankel import HankelShape, lift, adjoint, multiplicity, pseudo_inverse
from .solver import (
    ChannelMode,
    SolverConfig,
    DecompositionResult,
    soft_threshold,
    group_soft_threshold,
    robust_decompose,
    inpaint,
)

__version__ = "0.1.0"
