"""Topological map memory with staleness-gated pruning.

The map grows from simulator observations. Once the episode clock reaches
``t_start``, every update is followed by a prune that scores stale visited
nodes and drops the most prunable ones:

    P(v) = lam_t * max(1, t - tau(v) - theta_age)
         + lam_d * (-deg(v))
         + lam_f * (-#unvisited neighbours of v)
         + lam_dist * hops(current, v)

Higher scores are pruned first.
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .world import StepObservation


@dataclass(frozen=True)
class PruneConfig:
    t_start: int = 15
    theta_recent_visit: int = 3
    theta_age: int = 10
    n_remove: int = 1
    lambda_t: float = 1.0
    lambda_d: float = 2.0
    lambda_f: float = 5.0
    lambda_dist: float = 0.5
    # None means "number of nodes currently in the map"
    unreachable_distance: Optional[float] = None

    def __post_init__(self):
        for name in ("t_start", "theta_recent_visit", "theta_age", "n_remove"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def scaled(self, factor: float) -> "PruneConfig":
        """Same thresholds, every lambda multiplied by ``factor``."""
        return replace(self, lambda_t=self.lambda_t * factor, lambda_d=self.lambda_d * factor,
                       lambda_f=self.lambda_f * factor, lambda_dist=self.lambda_dist * factor)


@dataclass
class NodeRecord:
    id: str
    last_visit: Optional[int] = None
    annotation: List[str] = field(default_factory=list)


class TopoMap:
    """Agent-side graph memory: nodes, undirected edges, visit history and clock.

    Each id gets a stable ``Place k`` label the first time it is observed;
    the label survives pruning so prompts stay consistent across steps.
    """

    def __init__(self):
        self.nodes: Dict[str, NodeRecord] = {}
        self.edges: Set[FrozenSet[str]] = set()
        self.visited: Set[str] = set()
        self.current: Optional[str] = None
        self.clock: int = 0
        self._labels: Dict[str, int] = {}
        self._first_visit: Dict[str, int] = {}
        self._adj: Dict[str, Set[str]] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def copy(self) -> "TopoMap":
        return copy.deepcopy(self)

    def neighbors(self, vid: str) -> Set[str]:
        return self._adj.get(vid, set())

    def degree(self, vid: str) -> int:
        return len(self._adj.get(vid, ()))

    def label(self, vid: str) -> int:
        return self._labels[vid]

    def place(self, vid: str) -> str:
        return f"Place {self._labels[vid]}"

    def id_for_label(self, k: int) -> str:
        for vid, lab in self._labels.items():
            if lab == k:
                return vid
        raise KeyError(k)

    def trajectory_order(self) -> List[str]:
        """Visited, surviving ids in order of first visit."""
        return sorted(self.visited, key=lambda v: (self._first_visit[v], self._labels[v]))

    def add_node(self, vid: str) -> None:
        if vid not in self.nodes:
            self.nodes[vid] = NodeRecord(vid)
            self._adj[vid] = set()
            self._labels.setdefault(vid, len(self._labels))

    def add_edge(self, a: str, b: str) -> None:
        if a == b:
            return
        self.add_node(a)
        self.add_node(b)
        self.edges.add(frozenset((a, b)))
        self._adj[a].add(b)
        self._adj[b].add(a)

    def visit(self, vid: str, at: Optional[int] = None) -> None:
        """Mark ``vid`` visited at step ``at`` (default: the current clock)."""
        at = self.clock if at is None else at
        self.add_node(vid)
        self.nodes[vid].last_visit = at
        if vid not in self.visited:
            self.visited.add(vid)
            self._first_visit[vid] = at

    def remove_node(self, vid: str) -> None:
        for n in self._adj.pop(vid):
            self._adj[n].discard(vid)
            self.edges.discard(frozenset((vid, n)))
        del self.nodes[vid]
        self.visited.discard(vid)
        self._first_visit.pop(vid, None)

    def hops_from(self, source: str) -> Dict[str, int]:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for n in self._adj[u]:
                if n not in dist:
                    dist[n] = dist[u] + 1
                    queue.append(n)
        return dist

    def check_invariants(self) -> None:
        assert self.current is None or self.current in self.visited
        assert self.visited <= set(self.nodes)
        for e in self.edges:
            assert len(e) == 2 and e <= set(self.nodes)
        for vid, rec in self.nodes.items():
            assert (rec.last_visit is not None) == (vid in self.visited)
            assert rec.last_visit is None or rec.last_visit <= self.clock


def observe_and_update(topo: TopoMap, obs: StepObservation) -> TopoMap:
    """Fold one observation into the map in place (the intermediate graph) and return it."""
    topo.clock += 1
    cur = obs.current
    # a node pruned earlier and walked back into re-enters here
    topo.visit(cur)
    topo.nodes[cur].annotation = list(obs.visible_objects)
    topo.current = cur
    for n in obs.navigable_ids:
        topo.add_edge(cur, n)
    return topo


def eligible_nodes(topo: TopoMap, cfg: PruneConfig) -> Set[str]:
    out = set()
    for v in topo.visited:
        if v == topo.current:
            continue
        gap = topo.clock - topo.nodes[v].last_visit
        if gap > cfg.theta_recent_visit and gap > cfg.theta_age:
            out.add(v)
    return out


def priority_score(topo: TopoMap, v: str, cfg: PruneConfig,
                   hops: Optional[Dict[str, int]] = None) -> float:
    assert v in eligible_nodes(topo, cfg), f"{v!r} is not eligible for pruning"
    if hops is None:
        hops = topo.hops_from(topo.current)
    return _score(topo, v, cfg, hops)


def _score(topo: TopoMap, v: str, cfg: PruneConfig, hops: Dict[str, int]) -> float:
    staleness = max(1, topo.clock - topo.nodes[v].last_visit - cfg.theta_age)
    unvisited = sum(1 for n in topo.neighbors(v) if n not in topo.visited)
    if v in hops:
        distance = float(hops[v])
    elif cfg.unreachable_distance is None:
        distance = float(len(topo.nodes))
    else:
        distance = float(cfg.unreachable_distance)
    return (cfg.lambda_t * staleness
            + cfg.lambda_d * -topo.degree(v)
            + cfg.lambda_f * -unvisited
            + cfg.lambda_dist * distance)


def score_all(topo: TopoMap, cfg: PruneConfig) -> Dict[str, float]:
    """Scores of every eligible node, computed on the map as it stands."""
    hops = topo.hops_from(topo.current) if topo.current is not None else {}
    return {v: _score(topo, v, cfg, hops) for v in eligible_nodes(topo, cfg)}


def prune(topo: TopoMap, cfg: PruneConfig) -> Tuple[TopoMap, List[Tuple[str, float]]]:
    """Remove the ``n_remove`` highest-scoring eligible nodes in place.

    All scores are taken on the pre-prune graph. Ties go to the
    lexicographically smallest id. Returns the map and the removed
    ``(id, score)`` pairs in removal order.
    """
    if topo.clock < cfg.t_start or cfg.n_remove == 0:
        return topo, []
    scores = score_all(topo, cfg)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    removed = ranked[:cfg.n_remove]
    for vid, _ in removed:
        topo.remove_node(vid)
    return topo, removed


@dataclass(frozen=True)
class MemoryContext:
    trajectory: str
    map: str
    supplementary: str

    @property
    def map_lines(self) -> int:
        return len(self.map.splitlines()) - 1

    def text(self) -> str:
        return "\n".join((self.trajectory, self.map, self.supplementary))


def _places(topo: TopoMap, ids: Iterable[str]) -> str:
    return ", ".join(topo.place(v) for v in ids)


def render_map_context(topo: TopoMap) -> MemoryContext:
    order = sorted(topo.nodes, key=topo.label)
    traj = topo.trajectory_order()
    trajectory = "Trajectory: " + (_places(topo, traj) if traj else "none")
    map_lines = ["Map:"]
    supp_lines = ["Supplementary Info:"]
    for v in order:
        nbrs = sorted(topo.neighbors(v), key=topo.label)
        if nbrs:
            map_lines.append(f"{topo.place(v)} is connected with {_places(topo, nbrs)}")
        else:
            map_lines.append(f"{topo.place(v)} has no connections")
        objs = topo.nodes[v].annotation
        supp_lines.append(f"{topo.place(v)}: {', '.join(objs) if objs else 'none'}")
    return MemoryContext(trajectory, "\n".join(map_lines), "\n".join(supp_lines))
