"""12D Matryoshka modulation over a coupled-core multicore-fiber link model."""

from .constellation import (
    CouplingRule,
    LabeledConstellation,
    RingGeometry,
    Scheme,
    build,
    build_matryoshka,
    build_pdm_qpsk,
    min_distance,
    projection_2d,
)
from .channel import LinkModel, snr_at_distance, transmit
from .metrics import MetricEstimate

__all__ = [
    "CouplingRule",
    "LabeledConstellation",
    "LinkModel",
    "MetricEstimate",
    "RingGeometry",
    "Scheme",
    "build",
    "build_matryoshka",
    "build_pdm_qpsk",
    "min_distance",
    "projection_2d",
    "snr_at_distance",
    "transmit",
]
