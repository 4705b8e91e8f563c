"""Dataset generators, reproduction commands, and the command-line interface."""

from .datasets import (
    DatasetSpec,
    FactorModel,
    FromCsv,
    InstabilityKernel,
    Parabola,
    StepCurve,
    generate,
)

__all__ = [
    "DatasetSpec",
    "FactorModel",
    "FromCsv",
    "InstabilityKernel",
    "Parabola",
    "StepCurve",
    "generate",
]
