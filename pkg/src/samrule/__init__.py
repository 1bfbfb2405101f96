"""Sample-based learning of nearly-optimal sparse rule lists, with VC-dimension certificates."""
from .complexity import BoundParams
from .dataset import BinaryDataset, ContinuousTable, SampleSpec, load_binary_csv
from .rulelist import Rule, RuleList, SearchSpace
from .sampling import run
from .solver import SolverOptions, brute_force, solve

__all__ = [
    "BinaryDataset",
    "BoundParams",
    "ContinuousTable",
    "Rule",
    "RuleList",
    "SampleSpec",
    "SearchSpace",
    "SolverOptions",
    "brute_force",
    "load_binary_csv",
    "run",
    "solve",
]

__version__ = "0.1.0"
