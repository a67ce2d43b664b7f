"""Learned Bakry-Emery curvature and curvature-adaptive message passing on graphs."""

from .exact import CurvatureEstimate, exact_curvature, exact_curvature_all
from .gnn import DepthAssignment, assign_depths
from .graph import GraphFormatError, WeightedGraph, load_graph
from .learn import CurvatureConfig, estimate_curvature
from .training import TrainConfig, train, train_graphs

__version__ = "0.1.0"

__all__ = [
    "CurvatureConfig",
    "CurvatureEstimate",
    "DepthAssignment",
    "GraphFormatError",
    "TrainConfig",
    "WeightedGraph",
    "assign_depths",
    "estimate_curvature",
    "exact_curvature",
    "exact_curvature_all",
    "load_graph",
    "train",
    "train_graphs",
]
