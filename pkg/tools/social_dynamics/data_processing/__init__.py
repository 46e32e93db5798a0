"""Data files and the event preprocessing pipeline."""

from .formats import (
    ModelFile,
    load_model,
    marginals_frame,
    model_to_dict,
    parse_model,
    read_events,
    read_params,
    read_snapshots,
    read_trajectory,
    write_events,
    write_marginals,
    write_params,
    write_snapshots,
    write_trajectory,
)
from .preprocess_events import EventPreprocessor

__all__ = [
    "EventPreprocessor",
    "ModelFile",
    "load_model",
    "marginals_frame",
    "model_to_dict",
    "parse_model",
    "read_events",
    "read_params",
    "read_snapshots",
    "read_trajectory",
    "write_events",
    "write_marginals",
    "write_params",
    "write_snapshots",
    "write_trajectory",
]
