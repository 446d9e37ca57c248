"""Explicit generalized Calabi type Kaehler surfaces with a symbolic-numeric verification engine.

Layers, bottom up: :mod:`scalar` (expression trees with exact partial
derivatives), :mod:`exterior` (forms, frames, Hodge star), :mod:`cartan`
(connection and curvature in an orthonormal frame), :mod:`surfaces` (the
Calabi / tan / coth / tanh builders), :mod:`pde` (Newton solver for the
profile equation) and :mod:`verify` (the check suite).
"""

from .errors import (
    BuildRejected,
    ConfigError,
    DegenerateCoframeError,
    DivergenceError,
    DomainError,
    InfeasibleManufacturedSolution,
    KahlerQCHError,
    NotClosedError,
    SingularSystemError,
    UnsupportedOrderError,
    UsageError,
)
from .scalar import Box, ChartPoint
from .surfaces import (
    AlphaProfile,
    SurfaceModel,
    SurfaceSpec,
    build,
    build_calabi,
    build_coth,
    build_tan,
    build_tanh,
    classify_alpha,
    manufacture_h_from_H,
    mutate_theta3,
    potential_from_closed_form,
    volume_potential,
)
from .verify import CheckResult, VerificationReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "AlphaProfile",
    "Box",
    "BuildRejected",
    "ChartPoint",
    "CheckResult",
    "ConfigError",
    "DegenerateCoframeError",
    "DivergenceError",
    "DomainError",
    "InfeasibleManufacturedSolution",
    "KahlerQCHError",
    "NotClosedError",
    "SingularSystemError",
    "SurfaceModel",
    "SurfaceSpec",
    "UnsupportedOrderError",
    "UsageError",
    "VerificationReport",
    "build",
    "build_calabi",
    "build_coth",
    "build_tan",
    "build_tanh",
    "classify_alpha",
    "manufacture_h_from_H",
    "mutate_theta3",
    "potential_from_closed_form",
    "run_suite",
    "volume_potential",
]
