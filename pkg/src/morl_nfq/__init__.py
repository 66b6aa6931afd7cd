"""Multiobjective neural fitted Q-iteration with transfer across objective weightings."""
from .deepdraw import DeepDrawEnv, SurrogateParams
from .morl import (
    QNetSet,
    SampleMemory,
    TaskConfig,
    WeightVector,
    run_baseline_task,
    run_sequence,
    run_task,
    scalarize_arithmetic,
    scalarize_harmonic,
)

__version__ = "0.1.0"
