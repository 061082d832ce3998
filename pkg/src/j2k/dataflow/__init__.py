from j2k.dataflow.defuse import DEFAULT_BUILTINS, DefUseSet, extract_def_use
from j2k.dataflow.graph import Edge, Step, StepGraph, Unresolved, build_step_graph, topological_order

__all__ = [
    "DEFAULT_BUILTINS",
    "DefUseSet",
    "Edge",
    "Step",
    "StepGraph",
    "Unresolved",
    "build_step_graph",
    "extract_def_use",
    "topological_order",
]
