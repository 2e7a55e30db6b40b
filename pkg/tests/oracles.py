"""Independent reference computations used by tests. Nothing here imports the code under test's logic."""

import math

import networkx as nx
import numpy as np


def map_graph(topo):
    g = nx.Graph()
    g.add_nodes_from(topo.nodes)
    g.add_edges_from(tuple(e) for e in topo.edges)
    return g


def brute_force_prune(topo, cfg):
    """Removal list by enumerating every node and scoring the eligible ones from scratch."""
    if topo.clock < cfg.t_start or cfg.n_remove == 0:
        return []
    g = map_graph(topo)
    hops = nx.single_source_shortest_path_length(g, topo.current)
    scored = []
    for v in g.nodes:
        tau = topo.nodes[v].last_visit
        if v == topo.current or tau is None:
            continue
        gap = topo.clock - tau
        if not (gap > cfg.theta_recent_visit and gap > cfg.theta_age):
            continue
        f_t = max(1, gap - cfg.theta_age)
        f_d = -g.degree(v)
        f_f = -len([n for n in g.neighbors(v) if topo.nodes[n].last_visit is None])
        if v in hops:
            f_dist = hops[v]
        else:
            f_dist = g.number_of_nodes() if cfg.unreachable_distance is None else cfg.unreachable_distance
        score = cfg.lambda_t * f_t + cfg.lambda_d * f_d + cfg.lambda_f * f_f + cfg.lambda_dist * f_dist
        scored.append((v, score))
    best_first = sorted(scored, key=lambda vs: vs[0])
    best_first.sort(key=lambda vs: vs[1], reverse=True)  # stable: id order survives among ties
    return best_first[:cfg.n_remove]


def brute_force_view(target, n_headings=12, elevations_deg=(-30.0, 0.0, 30.0)):
    """Exhaustive argmin over the 36 views, vectorised, first index on ties."""
    heads = np.radians(np.arange(n_headings) * (360.0 / n_headings))
    elevs = np.radians(np.asarray(elevations_deg))
    hh = np.tile(heads, len(elevs))
    ee = np.repeat(elevs, n_headings)
    dh = np.abs(hh - target[0]) % (2 * np.pi)
    dh = np.minimum(dh, 2 * np.pi - dh)
    cost = dh + np.abs(ee - target[1])
    return int(np.argmin(cost)), float(cost.min())


def project_points(points, cam_pos, heading, elevation, focal, width, height):
    """Pinhole projection written from rotation matrices rather than basis vectors."""
    # world -> yaw about z (clockwise heading), then pitch about the camera x axis
    c, s = math.cos(heading), math.sin(heading)
    yaw = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    ce, se = math.cos(elevation), math.sin(elevation)
    pitch = np.array([[1.0, 0.0, 0.0], [0.0, ce, se], [0.0, -se, ce]])
    local = (np.asarray(points, float) - cam_pos) @ yaw.T @ pitch.T
    x, depth, z = local[:, 0], local[:, 1], local[:, 2]
    u = width / 2 + focal * x / depth
    v = height / 2 - focal * z / depth
    return u, v, depth


def trace_metrics(trace_lines, shortest_length):
    """NE, SR, OSR, SPL from the raw JSON lines of one trace file."""
    header = next(d for d in trace_lines if d["kind"] == "header")
    result = next(d for d in trace_lines if d["kind"] == "result")
    goal = np.asarray(header["goal_position"])
    radius = header["goal_radius"]
    pos = np.asarray(result["positions"], float)
    d_goal = np.linalg.norm(pos - goal, axis=1)
    ne = float(d_goal[-1])
    sr = int(ne <= radius and result.get("error") is None)
    osr = int((d_goal <= radius).any())
    walked = float(np.linalg.norm(np.diff(pos, axis=0), axis=1).sum()) if len(pos) > 1 else 0.0
    spl = sr * shortest_length / max(walked, shortest_length) if sr else 0.0
    return {"ne": ne, "sr": sr, "osr": osr, "spl": spl}
