"""Ground-state geometry of the N = 2 membrane matrix model."""

from __future__ import annotations

__version__ = "0.1.0"

from .membrane import KAPPA, MembraneConfig, invariants  # noqa: E402
from .variational import GroundStateModel, VariationalParams, minimize_closed  # noqa: E402

__all__ = [
    "KAPPA",
    "GroundStateModel",
    "MembraneConfig",
    "VariationalParams",
    "invariants",
    "minimize_closed",
]
