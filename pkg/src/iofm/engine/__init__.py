"""Fault management engine: use-case coordination, registry and reports."""

from .capability import CapabilityMatrix, capability_matrix
from .core import Engine, LocalizationOutcome, UseCaseResult
from .registry import FaultRegistry

__all__ = ["CapabilityMatrix", "Engine", "FaultRegistry", "LocalizationOutcome", "UseCaseResult",
           "capability_matrix"]
