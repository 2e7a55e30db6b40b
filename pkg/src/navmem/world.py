"""Simulated graph environments and navigation episodes.

A scene is a set of viewpoints with 3-D positions, undirected navigable
edges and per-viewpoint object annotations. The agent queries it through
:func:`observe` and moves through it with :func:`step`.

Axis convention: x east, y north, z up. Headings are measured clockwise
from north in ``[0, 2*pi)``; elevations lie in ``[-pi/2, pi/2]``.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

SCHEMA_VERSION = 1
DEFAULT_GOAL_RADIUS = 3.0
DEFAULT_MAX_STEPS = 40

Vec3 = Tuple[float, float, float]


class SceneError(ValueError):
    """Raised when a scene or episode file violates the schema."""

    def __init__(self, message: str, viewpoint_id: Optional[str] = None):
        super().__init__(message)
        self.viewpoint_id = viewpoint_id


class UnknownViewpointError(KeyError):
    def __init__(self, viewpoint_id: str):
        super().__init__(viewpoint_id)
        self.viewpoint_id = viewpoint_id

    def __str__(self) -> str:
        return f"unknown viewpoint id {self.viewpoint_id!r}"


class IllegalActionError(ValueError):
    """A MoveTo targeted something that is not a navigable neighbor."""


class DegenerateDirectionError(ValueError):
    pass


# -- actions -----------------------------------------------------------------


@dataclass(frozen=True)
class Stop:
    def __str__(self) -> str:
        return "stop"


@dataclass(frozen=True)
class MoveTo:
    target: str

    def __str__(self) -> str:
        return f"move_to:{self.target}"


Action = Union[Stop, MoveTo]
STOP = Stop()


def action_to_str(action: Action) -> str:
    return str(action)


def action_from_str(text: str) -> Action:
    if text == "stop":
        return STOP
    if text.startswith("move_to:"):
        return MoveTo(text[len("move_to:"):])
    raise ValueError(f"not an action: {text!r}")


class _Stopped:
    """Terminal marker returned by :func:`step` for a Stop action."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Stopped"


Stopped = _Stopped()


# -- scene types -------------------------------------------------------------


@dataclass(frozen=True)
class ObjectAnnotation:
    name: str
    center: Vec3
    half_extents: Vec3
    axes: Tuple[Vec3, Vec3, Vec3] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def __post_init__(self):
        if not self.name.strip():
            raise SceneError("object name must be nonempty")
        if any(h <= 0 for h in self.half_extents):
            raise SceneError(f"object {self.name!r}: half_extents must be strictly positive")
        rot = np.asarray(self.axes, dtype=float)
        if rot.shape != (3, 3) or not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6):
            raise SceneError(f"object {self.name!r}: axes are not orthonormal")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "center": list(self.center),
            "half_extents": list(self.half_extents),
            "axes": [list(a) for a in self.axes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectAnnotation":
        axes = d.get("axes", [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
        return cls(
            name=str(d["name"]),
            center=_vec3(d["center"]),
            half_extents=_vec3(d["half_extents"]),
            axes=tuple(_vec3(a) for a in axes),
        )


@dataclass(frozen=True)
class Viewpoint:
    id: str
    position: Vec3
    neighbors: Tuple[str, ...] = ()
    objects: Tuple[ObjectAnnotation, ...] = ()


@dataclass(frozen=True)
class Scene:
    """An immutable, validated scene. Build with :meth:`from_dict` or :func:`load_scene`."""

    scene_id: str
    viewpoints: Dict[str, Viewpoint] = field(hash=False)

    def __post_init__(self):
        _validate(self)

    def __getitem__(self, vid: str) -> Viewpoint:
        try:
            return self.viewpoints[vid]
        except KeyError:
            raise UnknownViewpointError(vid) from None

    def __contains__(self, vid: str) -> bool:
        return vid in self.viewpoints

    def position(self, vid: str) -> np.ndarray:
        return np.asarray(self[vid].position, dtype=float)

    def distance(self, a: str, b: str) -> float:
        return math.dist(self[a].position, self[b].position)

    def edges(self) -> List[Tuple[str, str]]:
        out = []
        for vid, vp in self.viewpoints.items():
            for n in vp.neighbors:
                if vid < n:
                    out.append((vid, n))
        return sorted(out)

    def shortest_distances(self, source: str) -> Dict[str, float]:
        """Dijkstra over Euclidean edge lengths from ``source``."""
        self[source]
        dist = {source: 0.0}
        heap = [(0.0, source)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for n in self.viewpoints[u].neighbors:
                nd = d + self.distance(u, n)
                if nd < dist.get(n, math.inf):
                    dist[n] = nd
                    heapq.heappush(heap, (nd, n))
        return dist

    def shortest_path_length(self, a: str, b: str) -> float:
        return self.shortest_distances(a).get(b, math.inf)

    def shortest_path(self, a: str, b: str) -> Optional[List[str]]:
        """Metric shortest path; ties between equal-length routes go to the smallest id."""
        to_goal = self.shortest_distances(b)
        if a not in to_goal:
            return None
        path = [a]
        while path[-1] != b:
            u = path[-1]
            path.append(min(self.viewpoints[u].neighbors,
                            key=lambda n: (self.distance(u, n) + to_goal.get(n, math.inf), n)))
        return path

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scene_id": self.scene_id,
            "viewpoints": [
                {
                    "id": vp.id,
                    "position": list(vp.position),
                    "neighbors": list(vp.neighbors),
                    "objects": [o.to_dict() for o in vp.objects],
                }
                for vp in self.viewpoints.values()
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        _check_version(d)
        try:
            scene_id = str(d["scene_id"])
            raw = d["viewpoints"]
        except (KeyError, TypeError) as e:
            raise SceneError(f"scene missing field: {e}") from None
        vps: Dict[str, Viewpoint] = {}
        for r in raw:
            vid = str(r["id"])
            if vid in vps:
                raise SceneError(f"duplicate viewpoint id {vid!r}", vid)
            try:
                vps[vid] = Viewpoint(
                    id=vid,
                    position=_vec3(r["position"]),
                    neighbors=tuple(str(n) for n in r.get("neighbors", [])),
                    objects=tuple(ObjectAnnotation.from_dict(o) for o in r.get("objects", [])),
                )
            except SceneError as e:
                raise SceneError(f"viewpoint {vid!r}: {e}", vid) from None
            except (KeyError, TypeError, ValueError) as e:
                raise SceneError(f"viewpoint {vid!r}: malformed record ({e})", vid) from None
        return cls(scene_id, vps)


@dataclass(frozen=True)
class Episode:
    episode_id: str
    scene_id: str
    instruction: str
    start: str
    goal: str
    expert_path: Tuple[str, ...]
    goal_radius: float = DEFAULT_GOAL_RADIUS
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if not self.expert_path or self.expert_path[0] != self.start or self.expert_path[-1] != self.goal:
            raise SceneError(f"episode {self.episode_id}: expert_path must run from start to goal")
        if self.goal_radius <= 0:
            raise SceneError(f"episode {self.episode_id}: goal_radius must be positive")
        if self.max_steps < 0:
            raise SceneError(f"episode {self.episode_id}: max_steps must be non-negative")

    def check_against(self, scene: Scene) -> None:
        for a, b in zip(self.expert_path, self.expert_path[1:]):
            if b not in scene[a].neighbors:
                raise SceneError(f"episode {self.episode_id}: expert path step {a}->{b} is not an edge", a)
        scene[self.start], scene[self.goal]

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "scene_id": self.scene_id,
            "instruction": self.instruction,
            "start": self.start,
            "goal": self.goal,
            "expert_path": list(self.expert_path),
            "goal_radius": self.goal_radius,
            "max_steps": self.max_steps,
        }

    @classmethod
    def from_dict(cls, d: dict, index: int = 0) -> "Episode":
        return cls(
            episode_id=str(d.get("episode_id", index)),
            scene_id=str(d["scene_id"]),
            instruction=str(d["instruction"]),
            start=str(d["start"]),
            goal=str(d["goal"]),
            expert_path=tuple(str(v) for v in d["expert_path"]),
            goal_radius=float(d.get("goal_radius", DEFAULT_GOAL_RADIUS)),
            max_steps=int(d.get("max_steps", DEFAULT_MAX_STEPS)),
        )


@dataclass(frozen=True)
class Navigable:
    id: str
    heading: float
    elevation: float
    distance: float


@dataclass(frozen=True)
class StepObservation:
    current: str
    navigable: Tuple[Navigable, ...]
    visible_objects: Tuple[str, ...]

    @property
    def navigable_ids(self) -> List[str]:
        return [n.id for n in self.navigable]


# -- geometry ----------------------------------------------------------------


def heading_elevation(delta: Sequence[float]) -> Tuple[float, float]:
    """Heading (clockwise from north) and elevation of a displacement vector.

    Heading is pinned to 0 when the horizontal component vanishes.
    """
    dx, dy, dz = (float(c) for c in delta)
    horizontal = math.hypot(dx, dy)
    if horizontal == 0.0 and dz == 0.0:
        raise DegenerateDirectionError("zero displacement has no direction")
    heading = math.atan2(dx, dy) % math.tau if horizontal > 0.0 else 0.0
    # atan2 can return -0.0 or values that round up to tau after the modulo
    if heading >= math.tau:
        heading = 0.0
    return heading, math.atan2(dz, horizontal)


# -- operations --------------------------------------------------------------


def observe(scene: Scene, current: str) -> StepObservation:
    vp = scene[current]
    nav = []
    for n in vp.neighbors:
        delta = np.subtract(scene[n].position, vp.position)
        heading, elevation = heading_elevation(delta)
        nav.append(Navigable(n, heading, elevation, float(np.linalg.norm(delta))))
    names = tuple(dict.fromkeys(o.name for o in vp.objects))
    return StepObservation(current, tuple(nav), names)


def step(scene: Scene, current: str, action: Action):
    """Apply ``action`` at ``current``; returns the new viewpoint id or ``Stopped``."""
    vp = scene[current]
    if isinstance(action, Stop):
        return Stopped
    if isinstance(action, MoveTo):
        if action.target not in vp.neighbors:
            raise IllegalActionError(f"{action.target!r} is not navigable from {current!r}")
        return action.target
    raise IllegalActionError(f"unknown action {action!r}")


def load_scene(path: Union[str, Path]) -> Scene:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SceneError(f"{path}: invalid JSON ({e})") from None
    return Scene.from_dict(data)


def save_scene(scene: Scene, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=1))


def load_episodes(path: Union[str, Path]) -> List[Episode]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SceneError(f"{path}: invalid JSON ({e})") from None
    if isinstance(data, dict):
        _check_version(data)
        data = data.get("episodes", [])
    return [Episode.from_dict(d, i) for i, d in enumerate(data)]


def save_episodes(episodes: Sequence[Episode], path: Union[str, Path]) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "episodes": [e.to_dict() for e in episodes]}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_scenes(paths: Sequence[Union[str, Path]]) -> Dict[str, Scene]:
    scenes = {}
    for p in paths:
        p = Path(p)
        files = sorted(p.glob("*.json")) if p.is_dir() else [p]
        for f in files:
            s = load_scene(f)
            scenes[s.scene_id] = s
    return scenes


def _vec3(v) -> Vec3:
    x, y, z = (float(c) for c in v)
    return (x, y, z)


def _check_version(d: dict) -> None:
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SceneError(f"unsupported schema_version {version!r}")


def _validate(scene: Scene) -> None:
    vps = scene.viewpoints
    for vid, vp in vps.items():
        if vp.id != vid:
            raise SceneError(f"viewpoint key {vid!r} does not match id {vp.id!r}", vid)
        if len(set(vp.neighbors)) != len(vp.neighbors):
            raise SceneError(f"viewpoint {vid!r} lists a neighbor twice", vid)
        for n in vp.neighbors:
            if n == vid:
                raise SceneError(f"viewpoint {vid!r} lists itself as a neighbor", vid)
            if n not in vps:
                raise SceneError(f"viewpoint {vid!r} references missing neighbor {n!r}", n)
            if vid not in vps[n].neighbors:
                raise SceneError(f"asymmetric edge {vid!r} -> {n!r}", vid)
            if vp.position == vps[n].position:
                raise SceneError(f"neighbors {vid!r} and {n!r} share a position", vid)
