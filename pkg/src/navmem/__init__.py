"""Graph-world navigation harness with pruned topological memory."""

from .memgraph import PruneConfig, TopoMap, prune, render_map_context
from .metrics import MetricReport, map_efficiency, ndcg
from .world import Episode, MoveTo, Scene, STOP, load_episodes, load_scene

__version__ = "0.1.0"

__all__ = [
    "PruneConfig", "TopoMap", "prune", "render_map_context",
    "MetricReport", "map_efficiency", "ndcg",
    "Episode", "MoveTo", "Scene", "STOP", "load_episodes", "load_scene",
]
