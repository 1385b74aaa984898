"""Generalized operational circuits allowing pre- and post-selection, with time-reversal tools."""

from .linalg import CPMap, DomainError, StructuralError
from .operations import (
    EffectPair, GeneralizedOperation, Null, StatePair, UpdateKernel, compose_parallel,
    compose_sequential, is_standard, joint_distribution, make_operation, measurement, preparation,
    probability, update,
)
from .circuit import Circuit, Node, Wire, evaluate, foliate

__version__ = "0.1.0"
