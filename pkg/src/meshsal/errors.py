"""Exception hierarchy shared across the package."""
from __future__ import annotations


class MeshSalError(Exception):
    """Base class for all package errors."""


class MeshFormatError(MeshSalError):
    """Malformed mesh file (message carries the offending line number)."""


class UnsupportedTopologyError(MeshSalError):
    """Input contains non-triangle faces."""


class DegenerateFaceError(MeshSalError):
    """Geometric query on a zero-area face."""


class ConfigError(MeshSalError):
    """Inconsistent or unsatisfiable configuration."""


class NumericError(MeshSalError):
    """Non-finite value encountered during a numeric computation."""


class NoFixationHitError(MeshSalError):
    """No fixation ray intersected the mesh; the saliency map would be empty."""
