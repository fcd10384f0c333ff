"""Numerical lab for generalized nonexpansive mappings and Banach-space constants."""

__version__ = "0.1.0"

from .errors import FptLabError, InputError, MappingError, PreconditionError
from .iteration import ARBound, OrbitTrace, ar_bound, averaged_map, orbit, orbits
from .space import ConvexBody, Functional, SpaceDescriptor, Vector, norm, norming_functional
from .zoo import ConditionReport, MappingSpec, zoo_map

__all__ = [
    "ARBound",
    "ConditionReport",
    "ConvexBody",
    "FptLabError",
    "Functional",
    "InputError",
    "MappingError",
    "MappingSpec",
    "OrbitTrace",
    "PreconditionError",
    "SpaceDescriptor",
    "Vector",
    "ar_bound",
    "averaged_map",
    "norm",
    "norming_functional",
    "orbit",
    "orbits",
    "zoo_map",
]
