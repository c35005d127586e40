"""asmell: architectural smell detection and evolution analysis for C/C++ code bases.

Pipeline: include-level dependency graphs per snapshot, detectors for cyclic
dependencies, hub-like, unstable and god components, cross-version tracking,
and evolution analyses (trends, survival, co-occurrence, precedence).
"""

from __future__ import annotations

from .detect import DetectConfig, SmellInstance, SmellType, detect_version
from .graph import DependencyGraph, Level, Node, build_graph, load_graph, project_to_components, save_graph
from .pipeline import RunConfig, run_pipeline
from .track import TemporalInstance, build_temporal_instances

__version__ = "0.1.0"

__all__ = [
    "DependencyGraph",
    "DetectConfig",
    "Level",
    "Node",
    "RunConfig",
    "SmellInstance",
    "SmellType",
    "TemporalInstance",
    "build_graph",
    "build_temporal_instances",
    "detect_version",
    "load_graph",
    "project_to_components",
    "run_pipeline",
    "save_graph",
]
