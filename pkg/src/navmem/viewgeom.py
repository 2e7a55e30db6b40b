"""Discrete view grid and representative-view selection for navigable candidates."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .world import DegenerateDirectionError, Scene, heading_elevation

N_HEADINGS = 12
ELEVATIONS_DEG = (-30.0, 0.0, 30.0)
# horizontal/vertical field of view used by the discovery scan
SCAN_FOV = math.radians(60.0)


@dataclass(frozen=True)
class ViewGrid:
    """12 headings (30 deg apart, starting at north) x 3 elevations.

    View ``k`` sits at elevation row ``k // 12`` and heading column ``k % 12``.
    """

    headings: Tuple[float, ...] = tuple(math.radians(30.0 * i) for i in range(N_HEADINGS))
    elevations: Tuple[float, ...] = tuple(math.radians(e) for e in ELEVATIONS_DEG)

    def __len__(self) -> int:
        return len(self.headings) * len(self.elevations)

    def view(self, k: int) -> Tuple[float, float]:
        row, col = divmod(k, len(self.headings))
        return self.headings[col], self.elevations[row]

    def index(self, heading_col: int, elevation_row: int) -> int:
        return elevation_row * len(self.headings) + heading_col

    def views(self) -> List[Tuple[float, float]]:
        return [self.view(k) for k in range(len(self))]


DEFAULT_GRID = ViewGrid()


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = math.remainder(a, math.tau)
    return math.pi if w == -math.pi else w


def angular_l1(view: Tuple[float, float], target: Tuple[float, float]) -> float:
    return abs(wrap_angle(view[0] - target[0])) + abs(view[1] - target[1])


def target_direction(src: Sequence[float], dst: Sequence[float]) -> Tuple[float, float]:
    delta = np.subtract(dst, src, dtype=float)
    if not np.any(delta):
        raise DegenerateDirectionError("source and target coincide")
    return heading_elevation(delta)


def select_best_view(grid: ViewGrid, target: Tuple[float, float]) -> int:
    best, best_d = 0, math.inf
    for k in range(len(grid)):
        d = angular_l1(grid.view(k), target)
        if d < best_d:
            best, best_d = k, d
    return best


def discovery_view(grid: ViewGrid, target: Tuple[float, float], fov: float = SCAN_FOV) -> int:
    """First view in scan order whose field of view contains ``target``.

    Falls back to the best view for directions the scan cannot see
    (steeper than the top or bottom row's field of view).
    """
    half = fov / 2
    for k in range(len(grid)):
        h, e = grid.view(k)
        if abs(wrap_angle(h - target[0])) <= half and abs(e - target[1]) <= half:
            return k
    return select_best_view(grid, target)


@dataclass(frozen=True)
class CandidateView:
    target: str
    discovered_view: int
    optimized_view: int
    direction: Tuple[float, float]
    position: Tuple[float, float, float]
    distance: float
    visible: Tuple[str, ...] = ()


class CandidateCache:
    """Per-location candidate lists keyed by ``(scene_id, viewpoint_id)``.

    Readers never block each other; insertion takes a lock. ``misses``
    counts how many lists were actually computed.
    """

    def __init__(self):
        self._store: Dict[Tuple[str, str], Tuple[CandidateView, ...]] = {}
        self._lock = threading.Lock()
        self.misses = 0

    def __len__(self) -> int:
        return len(self._store)

    def get(self, key):
        return self._store.get(key)

    def put(self, key, value) -> Tuple[CandidateView, ...]:
        with self._lock:
            if key not in self._store:
                self._store[key] = tuple(value)
                self.misses += 1
            return self._store[key]


def compute_candidates(scene: Scene, at: str, grid: ViewGrid = DEFAULT_GRID) -> List[CandidateView]:
    here = scene[at]
    out = []
    for n in here.neighbors:
        there = scene[n]
        direction = target_direction(here.position, there.position)
        out.append(CandidateView(
            target=n,
            discovered_view=discovery_view(grid, direction),
            optimized_view=select_best_view(grid, direction),
            direction=direction,
            position=there.position,
            distance=math.dist(here.position, there.position),
            visible=tuple(dict.fromkeys(o.name for o in there.objects)),
        ))
    return out


def discover_candidates(scene: Scene, at: str, cache: CandidateCache,
                        grid: ViewGrid = DEFAULT_GRID) -> List[CandidateView]:
    key = (scene.scene_id, at)
    hit = cache.get(key)
    if hit is None:
        hit = cache.put(key, compute_candidates(scene, at, grid))
    return list(hit)
