# contracts/__init__.py
from .models import (
    ActiveSetSpec,
    ClassWeights,
    FitReport,
    KernelSpec,
    LabeledBatch,
    PathResult,
    PipelineConfig,
    SolverConfig,
    UnlabeledPool,
)

__all__ = [
    "ActiveSetSpec",
    "ClassWeights",
    "FitReport",
    "KernelSpec",
    "LabeledBatch",
    "PathResult",
    "PipelineConfig",
    "SolverConfig",
    "UnlabeledPool",
]
