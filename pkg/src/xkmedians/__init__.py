"""Explainable k-medians under lp norms via randomized threshold trees.

Static construction, a fully dynamic maintainer with exponential-clock
cut streams, instance generators and an experiment harness.
"""

from .core import (
    CenterSet,
    Cut,
    Instance,
    Internal,
    Leaf,
    ThresholdTree,
    XkmediansError,
    assign,
    cost_tree,
    cost_unconstrained,
    lp_distance,
    validate_tree,
)
from .cut_stream import EarliestCutIndex, brute_force_stream_prefix, oracle_earliest_cut
from .dynamic_tree import DeleteRequest, DynamicTree, InsertRequest, replay_flatten
from .harness import ExperimentConfig, reference_kmedians
from .rng import RngHandle
from .static_builder import build_tree_static, get_anchor, partition_leaf_static, sample_cut

__version__ = "0.1.0"

__all__ = [
    "CenterSet",
    "Cut",
    "Instance",
    "Internal",
    "Leaf",
    "ThresholdTree",
    "XkmediansError",
    "assign",
    "cost_tree",
    "cost_unconstrained",
    "lp_distance",
    "validate_tree",
    "EarliestCutIndex",
    "brute_force_stream_prefix",
    "oracle_earliest_cut",
    "DynamicTree",
    "InsertRequest",
    "DeleteRequest",
    "replay_flatten",
    "ExperimentConfig",
    "reference_kmedians",
    "RngHandle",
    "build_tree_static",
    "get_anchor",
    "partition_leaf_static",
    "sample_cut",
    "__version__",
]
