import json

import pytest

from navmem.world import Scene


def grid_fixture(rows=2, cols=5, spacing=2.0):
    """Scene dict for a rows x cols lattice plus the edge list it was built from."""
    vid = lambda r, c: f"g{r}{c}"
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((vid(r, c), vid(r, c + 1)))
            if r + 1 < rows:
                edges.append((vid(r, c), vid(r + 1, c)))
    nbrs = {vid(r, c): [] for r in range(rows) for c in range(cols)}
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    vps = [{"id": vid(r, c), "position": [c * spacing, r * spacing, 0.0], "neighbors": nbrs[vid(r, c)],
            "objects": []} for r in range(rows) for c in range(cols)]
    return {"schema_version": 1, "scene_id": "grid10", "viewpoints": vps}, edges


def path3_dict():
    """a --(north 4 m)-- b --(east 4 m)-- c, one object at each place."""
    box = lambda name, x, y: {"name": name, "center": [x, y, 0.5], "half_extents": [0.4, 0.4, 0.4],
                              "axes": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}
    return {
        "schema_version": 1,
        "scene_id": "path3",
        "viewpoints": [
            {"id": "a", "position": [0, 0, 0], "neighbors": ["b"], "objects": [box("lamp", 0.5, 0.5)]},
            {"id": "b", "position": [0, 4, 0], "neighbors": ["a", "c"], "objects": [box("chair", 0.5, 4.5)]},
            {"id": "c", "position": [4, 4, 0], "neighbors": ["b"], "objects": [box("sink", 4.5, 4.5)]},
        ],
    }


@pytest.fixture
def write_json(tmp_path):
    def write(name, data):
        p = tmp_path / name
        p.write_text(json.dumps(data))
        return p
    return write


@pytest.fixture
def grid10():
    return Scene.from_dict(grid_fixture()[0])


@pytest.fixture
def path3():
    return Scene.from_dict(path3_dict())
