"""carnotkit: numerical 1-codimensional geometric measure theory in Carnot groups."""

__version__ = "0.1.0"

from .groups import (  # noqa: F401
    GroupError,
    GroupSpec,
    builtin_group,
    load_group,
    multiply,
    inverse,
    dilate,
    homogeneous_norm,
    distance,
)
