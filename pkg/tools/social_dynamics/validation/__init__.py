"""Trajectory and evidence validation."""

from .validate_trajectory import TrajectoryValidator

__all__ = ["TrajectoryValidator"]
