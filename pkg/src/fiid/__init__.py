"""Finite-window simulator for a factor-of-i.i.d. labeling of the regular tree
whose label clusters are all infinite, plus the checks that go with it."""

__version__ = "0.1.0"

from .construction import ConstructionConfig, LambdaResult, cluster_chain, init, run, step
from .errors import ContractViolation, DegeneracyError, InsufficientDataError, InvalidParameter
from .partition import Partition
from .tree_window import Forest, Tree, TreeWindow, build_window

__all__ = [
    "ConstructionConfig",
    "ContractViolation",
    "DegeneracyError",
    "Forest",
    "InsufficientDataError",
    "InvalidParameter",
    "LambdaResult",
    "Partition",
    "Tree",
    "TreeWindow",
    "build_window",
    "cluster_chain",
    "init",
    "run",
    "step",
]
