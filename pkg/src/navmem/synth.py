"""Synthetic scenes and episodes for tests, demos and desk-scale evaluation.

Grid scenes use integer coordinates with axis-aligned edges, so every
edge length and every path length is exact in floating point.
"""

from __future__ import annotations

import math
import random
from typing import Dict, List, Optional, Sequence, Tuple

from .world import Episode, ObjectAnnotation, Scene, Viewpoint

OBJECT_VOCABULARY = (
    "chair", "sofa", "table", "lamp", "bed", "sink", "refrigerator", "stove", "mirror",
    "plant", "picture", "cabinet", "television", "desk", "bathtub", "toilet", "shelf",
    "coffee table", "piano", "fireplace", "staircase", "door", "window", "rug",
)


def _objects(rng: random.Random, center: Tuple[float, float, float], k: int) -> Tuple[ObjectAnnotation, ...]:
    out = []
    for name in rng.sample(OBJECT_VOCABULARY, k):
        yaw = rng.uniform(0, math.tau)
        c, s = math.cos(yaw), math.sin(yaw)
        out.append(ObjectAnnotation(
            name=name,
            center=(center[0] + rng.uniform(-1, 1), center[1] + rng.uniform(-1, 1), rng.uniform(0.3, 1.2)),
            half_extents=(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.6)),
            axes=((c, s, 0.0), (-s, c, 0.0), (0.0, 0.0, 1.0)),
        ))
    return tuple(out)


def grid_scene(rows: int, cols: int, spacing: float = 2.0, scene_id: str = "grid",
               rng: Optional[random.Random] = None, extra_edge_prob: float = 1.0,
               max_objects: int = 2) -> Scene:
    """A rows x cols lattice. With ``extra_edge_prob < 1`` only a random spanning
    tree plus that fraction of the remaining lattice edges is kept."""
    rng = rng or random.Random(0)
    ids = {(r, c): f"{scene_id}_{r}_{c}" for r in range(rows) for c in range(cols)}
    lattice = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                lattice.append(((r, c), (r, c + 1)))
            if r + 1 < rows:
                lattice.append(((r, c), (r + 1, c)))
    rng.shuffle(lattice)
    parent = {k: k for k in ids}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    keep = set()
    for a, b in lattice:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            keep.add((a, b))
        elif rng.random() < extra_edge_prob:
            keep.add((a, b))
    nbrs: Dict[Tuple[int, int], List[str]] = {k: [] for k in ids}
    for a, b in keep:
        nbrs[a].append(ids[b])
        nbrs[b].append(ids[a])
    vps = {}
    for (r, c), vid in ids.items():
        pos = (c * spacing, r * spacing, 0.0)
        vps[vid] = Viewpoint(vid, pos, tuple(sorted(nbrs[(r, c)])),
                             _objects(rng, pos, rng.randint(0, max_objects)))
    return Scene(scene_id, vps)


def ring_scene(n: int, scene_id: str = "ring", radius: float = 20.0) -> Scene:
    vps = {}
    for i in range(n):
        a = math.tau * i / n
        vid = f"{scene_id}_{i:03d}"
        nbrs = (f"{scene_id}_{(i - 1) % n:03d}", f"{scene_id}_{(i + 1) % n:03d}")
        vps[vid] = Viewpoint(vid, (radius * math.sin(a), radius * math.cos(a), 0.0), tuple(sorted(set(nbrs))))
    return Scene(scene_id, vps)


def line_scene(n: int, spacing: float = 4.0, scene_id: str = "line") -> Scene:
    vps = {}
    for i in range(n):
        nbrs = tuple(f"{scene_id}_{j}" for j in (i - 1, i + 1) if 0 <= j < n)
        vps[f"{scene_id}_{i}"] = Viewpoint(f"{scene_id}_{i}", (0.0, i * spacing, 0.0), nbrs)
    return Scene(scene_id, vps)


def make_instruction(scene: Scene, path: Sequence[str], rng: random.Random) -> str:
    landmarks = [o.name for v in path[1:-1] for o in scene[v].objects]
    goal_objs = [o.name for o in scene[path[-1]].objects]
    parts = []
    if landmarks:
        parts.append(f"Walk past the {rng.choice(landmarks)}")
    else:
        parts.append("Walk down the hallway")
    parts.append(f"continue for {len(path) - 1} moves")
    if goal_objs:
        parts.append(f"and stop next to the {goal_objs[0]}.")
    else:
        parts.append("and stop there.")
    return " ".join(parts)


def random_episode(scene: Scene, rng: random.Random, episode_id: str, min_hops: int = 3,
                   max_steps: int = 40) -> Episode:
    ids = sorted(scene.viewpoints)
    for _ in range(1000):
        start, goal = rng.sample(ids, 2)
        path = scene.shortest_path(start, goal)
        if path is not None and len(path) - 1 >= min_hops:
            return Episode(episode_id, scene.scene_id, make_instruction(scene, path, rng),
                           start, goal, tuple(path), max_steps=max_steps)
    raise ValueError(f"scene {scene.scene_id} has no start/goal pair {min_hops} hops apart")


def random_corpus(n_episodes: int, seed: int = 0, n_scenes: int = 5, rows: int = 5, cols: int = 6,
                  extra_edge_prob: float = 0.3, min_hops: int = 3,
                  max_steps: int = 40) -> Tuple[Dict[str, Scene], List[Episode]]:
    rng = random.Random(seed)
    scenes = {}
    for i in range(n_scenes):
        s = grid_scene(rows, cols, scene_id=f"scene{i:02d}", rng=rng, extra_edge_prob=extra_edge_prob)
        scenes[s.scene_id] = s
    order = sorted(scenes)
    episodes = [random_episode(scenes[order[i % n_scenes]], rng, f"ep{i:04d}", min_hops, max_steps)
                for i in range(n_episodes)]
    return scenes, episodes
