import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from navmem.synth import grid_scene
from navmem.viewgeom import (DEFAULT_GRID, CandidateCache, angular_l1, compute_candidates,
                             discover_candidates, select_best_view, target_direction)
from navmem.world import DegenerateDirectionError, Scene

from oracles import brute_force_view

GRID = DEFAULT_GRID
deg = math.radians


def test_grid_shape():
    assert len(GRID) == 36
    assert GRID.view(0) == (0.0, deg(-30))
    assert GRID.view(15) == pytest.approx((deg(90), 0.0))
    assert GRID.index(3, 1) == 15
    heads = sorted({h for h, _ in GRID.views()})
    assert heads == pytest.approx([deg(30 * i) for i in range(12)])


def test_target_direction_axis_cases():
    assert target_direction((0, 0, 0), (0, 5, 0)) == (0.0, 0.0)
    h, e = target_direction((1, 1, 1), (1, 1, 4))
    assert h == 0.0 and e == pytest.approx(math.pi / 2)
    with pytest.raises(DegenerateDirectionError):
        target_direction((1, 2, 3), (1, 2, 3))


def test_target_direction_trig_oracle():
    rng = random.Random(11)
    for _ in range(1000):
        a = [rng.uniform(-5, 5) for _ in range(3)]
        b = [rng.uniform(-5, 5) for _ in range(3)]
        dx, dy, dz = (q - p for p, q in zip(a, b))
        h, e = target_direction(a, b)
        bearing = math.radians((90.0 - math.degrees(math.atan2(dy, dx))) % 360.0)
        assert abs(math.remainder(h - bearing, math.tau)) < 1e-9
        assert abs(e - math.asin(dz / math.sqrt(dx * dx + dy * dy + dz * dz))) < 1e-9


def test_on_grid_target_selects_itself():
    for k in range(36):
        assert select_best_view(GRID, GRID.view(k)) == k


def test_wraps_359_to_north():
    k = select_best_view(GRID, (deg(359), 0.0))
    assert k == brute_force_view((deg(359), 0.0))[0] == 12
    assert GRID.view(k)[0] == 0.0


def test_equidistant_tie_picks_lower_index():
    # 15 deg sits exactly between the 0 and 30 deg headings
    assert select_best_view(GRID, (deg(15), 0.0)) == 12


targets = st.tuples(st.floats(0, math.tau, exclude_max=True), st.floats(-math.pi / 2, math.pi / 2))


@given(targets)
def test_matches_brute_force(t):
    assert select_best_view(GRID, t) == brute_force_view(t)[0]


@given(targets)
def test_wrap_invariance(t):
    assert select_best_view(GRID, (t[0] + math.tau, t[1])) == select_best_view(GRID, t)


@given(st.tuples(st.floats(0, math.tau, exclude_max=True), st.floats(deg(-30), deg(30))))
def test_worst_case_error_in_band(t):
    k = select_best_view(GRID, t)
    assert angular_l1(GRID.view(k), t) <= deg(45) + 1e-12


def test_isolated_node_has_no_candidates():
    scene = Scene.from_dict({"scene_id": "solo", "viewpoints": [{"id": "x", "position": [0, 0, 0]}]})
    assert discover_candidates(scene, "x", CandidateCache()) == []


def test_east_neighbour_candidate():
    scene = Scene.from_dict({"scene_id": "pair", "viewpoints": [
        {"id": "x", "position": [0, 0, 0], "neighbors": ["y"]},
        {"id": "y", "position": [3, 0, 0], "neighbors": ["x"]},
    ]})
    (cand,) = discover_candidates(scene, "x", CandidateCache())
    assert cand.target == "y"
    assert cand.optimized_view == GRID.index(3, 1) == 15
    assert cand.direction == pytest.approx((math.pi / 2, 0.0))
    assert cand.position == (3.0, 0.0, 0.0)
    # discovery keeps the first scan view that sees it, which is a downward-tilted one
    assert cand.discovered_view == 3


def test_cache_hit_skips_recomputation():
    scene = grid_scene(3, 3)
    cache = CandidateCache()
    first = discover_candidates(scene, "grid_1_1", cache)
    assert cache.misses == 1
    second = discover_candidates(scene, "grid_1_1", cache)
    assert cache.misses == 1
    assert first == second == compute_candidates(scene, "grid_1_1")
    discover_candidates(scene, "grid_0_0", cache)
    assert cache.misses == 2 and len(cache) == 2
