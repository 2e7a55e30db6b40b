"""Navigation metrics (NE, SR, OSR, SPL, map efficiency) and object-list metrics (F1, NDCG)."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .spatial import Extraction, IOSample, norm_name
from .world import Episode, Scene

ME_ALPHA = 0.25
LONG_HORIZON_STEPS = 10
NAV_METRICS = ("ne", "sr", "osr", "spl", "me")


@dataclass(frozen=True)
class EpisodeResult:
    episode_id: str
    trajectory: Tuple[str, ...]
    stopped_at: str
    steps: int
    path_length: float
    map_nodes: int
    min_goal_distance: float
    error: Optional[str] = None

    @classmethod
    def from_trajectory(cls, episode_id: str, trajectory: Sequence[str], scene: Scene, goal: str,
                        map_nodes: int, error: Optional[str] = None) -> "EpisodeResult":
        traj = tuple(trajectory)
        length = sum(scene.distance(a, b) for a, b in zip(traj, traj[1:]))
        closest = min(scene.distance(v, goal) for v in traj)
        return cls(episode_id, traj, traj[-1], len(traj) - 1, length, map_nodes, closest, error)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trajectory"] = list(self.trajectory)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeResult":
        return cls(d["episode_id"], tuple(d["trajectory"]), d["stopped_at"], int(d["steps"]),
                   float(d["path_length"]), int(d["map_nodes"]), float(d["min_goal_distance"]),
                   d.get("error"))


def navigation_error(result: EpisodeResult, episode: Episode, scene: Scene) -> float:
    return scene.distance(result.stopped_at, episode.goal)


def success(result: EpisodeResult, episode: Episode, scene: Scene) -> int:
    # an episode that ended in an error (illegal action, planner failure) is a failure
    if result.error is not None:
        return 0
    return int(navigation_error(result, episode, scene) <= episode.goal_radius)


def oracle_success(result: EpisodeResult, episode: Episode, scene: Scene) -> int:
    return int(result.min_goal_distance <= episode.goal_radius)


def spl(result: EpisodeResult, episode: Episode, scene: Scene) -> float:
    s = success(result, episode, scene)
    if not s:
        return 0.0
    best = scene.shortest_path_length(episode.start, episode.goal)
    denom = max(result.path_length, best)
    return 1.0 if denom == 0 else s * best / denom


def map_efficiency(result: EpisodeResult, episode: Episode, alpha: float = ME_ALPHA) -> float:
    expert = set(episode.expert_path)
    assert expert, "map efficiency needs a nonempty expert path"
    coverage = len(set(result.trajectory) & expert) / len(expert)
    return coverage / (1.0 + alpha * result.map_nodes / len(expert))


# -- object lists ------------------------------------------------------------


def f1(predicted: Iterable[str], truth: Iterable[str]) -> float:
    p = {norm_name(x) for x in predicted}
    t = {norm_name(x) for x in truth}
    if not p and not t:
        return 1.0
    hit = len(p & t)
    if hit == 0:
        return 0.0
    precision, recall = hit / len(p), hit / len(t)
    return 2 * precision * recall / (precision + recall)


def f1_scores(predicted: Extraction, truth: IOSample) -> Tuple[float, float, float]:
    """(F1 on direct objects, F1 on inferred objects, F1 on the combined list)."""
    return (
        f1(predicted.direct, truth.direct_objects),
        f1(predicted.inferred, truth.inferred_objects),
        f1([*predicted.direct, *predicted.inferred], [*truth.direct_objects, *truth.inferred_objects]),
    )


def ndcg(predicted: Sequence[str], truth: Sequence[str]) -> float:
    """Binary-relevance NDCG; repeated predictions earn nothing after their first rank."""
    relevant = {norm_name(x) for x in truth}
    if not relevant:
        return 1.0 if not predicted else 0.0
    dcg, seen = 0.0, set()
    for rank, item in enumerate(predicted, start=1):
        key = norm_name(item)
        if key in relevant and key not in seen:
            dcg += 1.0 / math.log2(rank + 1)
        seen.add(key)
    idcg = sum(1.0 / math.log2(rank + 1) for rank in range(1, len(relevant) + 1))
    return dcg / idcg


@dataclass
class IOSReport:
    f1do: float
    f1io: float
    f1: float
    ndcg: float
    count: int


def evaluate_ios(predictions: Sequence[IOSample], truths: Sequence[IOSample]) -> IOSReport:
    if len(predictions) != len(truths):
        raise ValueError(f"{len(predictions)} predictions for {len(truths)} samples")
    rows = []
    for p, t in zip(predictions, truths):
        ext = Extraction.from_sample(p)
        rows.append((*f1_scores(ext, t),
                     ndcg([*p.direct_objects, *p.inferred_objects], [*t.direct_objects, *t.inferred_objects])))
    n = len(rows)
    means = [sum(col) / n for col in zip(*rows)] if n else [0.0] * 4
    return IOSReport(*means, count=n)


# -- reports -----------------------------------------------------------------


@dataclass
class EpisodeMetrics:
    episode_id: str
    ne: float
    sr: int
    osr: int
    spl: float
    me: float
    steps: int
    path_length: float
    map_nodes: int
    error: Optional[str] = None


def score_episode(result: EpisodeResult, episode: Episode, scene: Scene,
                  alpha: float = ME_ALPHA) -> EpisodeMetrics:
    return EpisodeMetrics(
        episode_id=result.episode_id,
        ne=navigation_error(result, episode, scene),
        sr=success(result, episode, scene),
        osr=oracle_success(result, episode, scene),
        spl=spl(result, episode, scene),
        me=map_efficiency(result, episode, alpha),
        steps=result.steps,
        path_length=result.path_length,
        map_nodes=result.map_nodes,
        error=result.error,
    )


@dataclass
class MetricReport:
    records: List[EpisodeMetrics] = field(default_factory=list)
    long_horizon_threshold: int = LONG_HORIZON_STEPS

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def empty(self) -> bool:
        return not self.records

    @property
    def long_horizon_count(self) -> int:
        return sum(1 for r in self.records if r.steps > self.long_horizon_threshold)

    @property
    def aggregates(self) -> Dict[str, float]:
        if not self.records:
            return {k: 0.0 for k in NAV_METRICS}
        return {k: sum(getattr(r, k) for r in self.records) / len(self.records) for k in NAV_METRICS}

    def by_id(self) -> Dict[str, EpisodeMetrics]:
        return {r.episode_id: r for r in self.records}

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "empty": self.empty,
            "long_horizon_count": self.long_horizon_count,
            "aggregates": self.aggregates,
            "episodes": [asdict(r) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(EpisodeMetrics.__dataclass_fields__)
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for r in self.records:
            writer.writerow(asdict(r))
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls([EpisodeMetrics(**r) for r in d["episodes"]])

    def summary(self) -> str:
        a = self.aggregates
        return (f"episodes {self.count}  SR {100 * a['sr']:.1f}  SPL {100 * a['spl']:.1f}  "
                f"OSR {100 * a['osr']:.1f}  NE {a['ne']:.2f}  ME {100 * a['me']:.1f}  "
                f"long-horizon {self.long_horizon_count}")
