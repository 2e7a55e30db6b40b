"""Episode runner, trace persistence and corpus-level evaluation."""

from __future__ import annotations

import configparser
import json
import logging
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from . import memgraph
from .memgraph import PruneConfig, TopoMap
from .metrics import LONG_HORIZON_STEPS, ME_ALPHA, EpisodeResult, MetricReport, score_episode
from .planner import Planner, build_prompt, decide
from .spatial import Extraction, ParseError, extract_objects_external, extract_objects_rule_based
from .viewgeom import CandidateCache, discover_candidates
from .world import (Episode, IllegalActionError, Scene, Stop, action_from_str, action_to_str,
                    observe, step)

log = logging.getLogger(__name__)

EXTERNAL_PARALLELISM_CAP = 8


@dataclass
class RunConfig:
    scenes: List[str] = field(default_factory=list)
    episodes: Optional[str] = None
    planner: str = "oracle"
    planner_options: Dict[str, str] = field(default_factory=dict)
    prune: PruneConfig = field(default_factory=PruneConfig)
    pruning: bool = True
    seed: int = 0
    parallelism: Optional[int] = None
    max_retries: int = 2
    output_dir: Optional[str] = None
    extractor: str = "rule"
    variant: str = "r2r"
    alpha: float = ME_ALPHA

    def workers(self) -> int:
        n = self.parallelism or os.cpu_count() or 1
        if self.planner == "external":
            n = min(n, EXTERNAL_PARALLELISM_CAP)
        return max(1, n)


_PRUNE_KEYS = {f.name for f in fields(PruneConfig)}


def parse_config_text(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """Read ``key = value`` lines (``#`` comments allowed) into a RunConfig.

    Prune constants use their field names directly (``t_start = 15``);
    planner options use a ``planner.`` prefix (``planner.model = ...``).
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string("[run]\n" + text)
    cfg = base or RunConfig()
    prune_kw, kw = {}, {}
    opts = dict(cfg.planner_options)
    for key, value in parser["run"].items():
        if key in _PRUNE_KEYS:
            prune_kw[key] = _prune_value(key, value)
        elif key.startswith("planner."):
            opts[key[len("planner."):]] = value
        elif key == "scenes":
            kw["scenes"] = [s.strip() for s in value.split(",") if s.strip()]
        elif key in ("seed", "max_retries"):
            kw[key] = int(value)
        elif key == "parallelism":
            kw[key] = int(value) if value.lower() != "none" else None
        elif key == "alpha":
            kw[key] = float(value)
        elif key == "pruning":
            kw[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in ("episodes", "planner", "output_dir", "extractor", "variant"):
            kw[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    return replace(cfg, prune=replace(cfg.prune, **prune_kw), planner_options=opts, **kw)


def _prune_value(key: str, value: str):
    if key == "unreachable_distance" and value.lower() == "none":
        return None
    if key.startswith("lambda") or key == "unreachable_distance":
        return float(value)
    return int(value)


def load_config(path: Union[str, Path], base: Optional[RunConfig] = None) -> RunConfig:
    return parse_config_text(Path(path).read_text(), base)


def episode_seed(seed: int, round_index: int, episode_id: str) -> int:
    return zlib.crc32(f"{seed}:{round_index}:{episode_id}".encode())


# -- traces ------------------------------------------------------------------


@dataclass
class StepTrace:
    clock: int
    current: str
    position: List[float]
    options: List[List[str]]
    action: str
    pruned: List[Tuple[str, float]]
    prompt_bytes: int
    map_nodes: int
    map_lines: int
    thought: str = ""


@dataclass
class TraceRecord:
    header: dict
    steps: List[StepTrace]
    result: EpisodeResult
    positions: List[List[float]]

    def actions(self):
        return [action_from_str(s.action) for s in self.steps if s.action]

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "header", **self.header}, sort_keys=True)]
        for s in self.steps:
            lines.append(json.dumps({"kind": "step", **asdict(s)}, sort_keys=True))
        res = {"kind": "result", **self.result.to_dict(), "positions": self.positions}
        lines.append(json.dumps(res, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "TraceRecord":
        header, steps, result, positions = {}, [], None, []
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            kind = d.pop("kind")
            if kind == "header":
                header = d
            elif kind == "step":
                d["pruned"] = [tuple(p) for p in d["pruned"]]
                steps.append(StepTrace(**d))
            elif kind == "result":
                positions = d.pop("positions")
                result = EpisodeResult.from_dict(d)
        if result is None:
            raise ValueError("trace has no result line")
        return cls(header, steps, result, positions)


def load_trace(path: Union[str, Path]) -> TraceRecord:
    return TraceRecord.from_jsonl(Path(path).read_text())


# -- episode loop ------------------------------------------------------------


def extract_for(episode: Episode, scene: Scene, cfg: RunConfig, client=None) -> Extraction:
    if cfg.extractor == "none":
        return Extraction()
    if cfg.extractor == "rule":
        vocab = {o.name for vp in scene.viewpoints.values() for o in vp.objects}
        return extract_objects_rule_based(episode.instruction, vocab) if vocab else Extraction()
    if cfg.extractor == "external":
        if client is None:
            raise ValueError("external extraction needs a chat client")
        for attempt in range(cfg.max_retries + 1):
            try:
                return extract_objects_external(episode.instruction, client, with_layout=True)
            except ParseError as e:
                log.warning("%s: extraction attempt %d failed: %s", episode.episode_id, attempt + 1, e)
        return Extraction()
    raise ValueError(f"unknown extractor {cfg.extractor!r}")


def run_episode(scene: Scene, episode: Episode, planner: Planner, cfg: RunConfig,
                seed: Optional[int] = None, extraction: Optional[Extraction] = None) -> TraceRecord:
    """Observe, update memory, prune, pick candidates, prompt, decide, act; until done."""
    seed = episode_seed(cfg.seed, 0, episode.episode_id) if seed is None else seed
    agent = planner.for_episode(scene, episode, seed)
    if extraction is None:
        extraction = extract_for(episode, scene, cfg, getattr(planner, "client", None))
    topo = TopoMap()
    cache = CandidateCache()
    current = episode.start
    trajectory = [current]
    history = []
    steps: List[StepTrace] = []
    previous_plan = ""
    error = None

    for _ in range(episode.max_steps):
        memgraph.observe_and_update(topo, observe(scene, current))
        pruned = memgraph.prune(topo, cfg.prune)[1] if cfg.pruning else []
        candidates = discover_candidates(scene, current, cache)
        bundle = build_prompt(episode, topo, extraction, candidates, history, previous_plan, cfg.variant)
        record = StepTrace(
            clock=topo.clock,
            current=current,
            position=list(scene[current].position),
            options=[[o.letter, action_to_str(o.action)] for o in bundle.options],
            action="",
            pruned=[(v, s) for v, s in pruned],
            prompt_bytes=len(bundle.text().encode()),
            map_nodes=len(topo),
            map_lines=bundle.memory.map_lines,
        )
        steps.append(record)
        try:
            decision = decide(agent, bundle)
        except IllegalActionError as e:
            error = f"illegal action: {e}"
            break
        record.action = action_to_str(decision.action)
        record.thought = decision.thought
        if decision.error is not None:
            error = decision.error
            break
        if isinstance(decision.action, Stop):
            break
        current = step(scene, current, decision.action)
        trajectory.append(current)
        history.append(decision.action)
        previous_plan = decision.thought

    result = EpisodeResult.from_trajectory(episode.episode_id, trajectory, scene, episode.goal,
                                           len(topo), error)
    header = {
        "episode_id": episode.episode_id,
        "scene_id": episode.scene_id,
        "instruction": episode.instruction,
        "start": episode.start,
        "goal": episode.goal,
        "goal_position": list(scene[episode.goal].position),
        "goal_radius": episode.goal_radius,
        "expert_path": list(episode.expert_path),
        "shortest_path_length": scene.shortest_path_length(episode.start, episode.goal),
        "max_steps": episode.max_steps,
        "planner": getattr(planner, "name", type(planner).__name__),
        "seed": seed,
        "pruning": cfg.pruning,
        "extraction": {"direct": list(extraction.direct), "inferred": list(extraction.inferred),
                       "layout": extraction.layout},
    }
    positions = [list(scene[v].position) for v in trajectory]
    return TraceRecord(header, steps, result, positions)


def _failed_trace(scene: Scene, episode: Episode, exc: Exception, seed: int) -> TraceRecord:
    result = EpisodeResult.from_trajectory(episode.episode_id, [episode.start], scene, episode.goal,
                                           0, f"runner error: {exc}")
    header = {"episode_id": episode.episode_id, "scene_id": episode.scene_id, "seed": seed,
              "goal_position": list(scene[episode.goal].position), "goal_radius": episode.goal_radius,
              "shortest_path_length": scene.shortest_path_length(episode.start, episode.goal),
              "expert_path": list(episode.expert_path)}
    return TraceRecord(header, [], result, [list(scene[episode.start].position)])


def run_all(scenes: Mapping[str, Scene], episodes: Sequence[Episode], planner: Planner,
            cfg: RunConfig, round_index: int = 0,
            trace_dir: Optional[Union[str, Path]] = None) -> List[TraceRecord]:
    """Run every episode (in parallel up to ``cfg.workers()``); output order follows input order."""

    def one(ep: Episode) -> TraceRecord:
        seed = episode_seed(cfg.seed, round_index, ep.episode_id)
        scene = scenes[ep.scene_id]
        try:
            return run_episode(scene, ep, planner, cfg, seed)
        except Exception as e:  # never abort the corpus for one episode
            log.exception("episode %s failed", ep.episode_id)
            return _failed_trace(scene, ep, e, seed)

    workers = min(cfg.workers(), max(1, len(episodes)))
    if workers == 1:
        traces = [one(ep) for ep in episodes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(one, episodes))
    if trace_dir is not None:
        out = Path(trace_dir)
        out.mkdir(parents=True, exist_ok=True)
        for t in traces:
            (out / f"{t.result.episode_id}.jsonl").write_text(t.to_jsonl())
    return traces


def report_for(traces: Sequence[TraceRecord], scenes: Mapping[str, Scene], episodes: Sequence[Episode],
               alpha: float = ME_ALPHA) -> MetricReport:
    by_id = {e.episode_id: e for e in episodes}
    records = []
    for t in traces:
        ep = by_id[t.result.episode_id]
        records.append(score_episode(t.result, ep, scenes[ep.scene_id], alpha))
    return MetricReport(records)


def write_report(report: MetricReport, out_dir: Union[str, Path], stem: str = "report") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.json").write_text(report.to_json())
    (out / f"{stem}.csv").write_text(report.to_csv())


def run_corpus(scenes: Mapping[str, Scene], episodes: Sequence[Episode], planner: Planner,
               cfg: RunConfig) -> MetricReport:
    trace_dir = Path(cfg.output_dir) / "traces" if cfg.output_dir else None
    traces = run_all(scenes, episodes, planner, cfg, trace_dir=trace_dir)
    report = report_for(traces, scenes, episodes, cfg.alpha)
    if cfg.output_dir:
        write_report(report, cfg.output_dir)
    return report


def refine_rounds(scenes: Mapping[str, Scene], episodes: Sequence[Episode], planner: Planner,
                  rounds: int, cfg: RunConfig, reseed: bool = True) -> List[MetricReport]:
    """Cumulative re-evaluation: each round re-runs only the episodes still failed.

    A re-run's outcome replaces the previous one for that episode. With
    ``reseed`` each round derives fresh per-episode seeds.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    by_id = {e.episode_id: e for e in episodes}
    current: Dict[str, object] = {}
    reports = []
    for k in range(rounds):
        if k == 0:
            todo = list(episodes)
        else:
            todo = [by_id[r.episode_id] for r in reports[-1].records if not r.sr]
        trace_dir = Path(cfg.output_dir) / "traces" / f"round{k + 1}" if cfg.output_dir else None
        traces = run_all(scenes, todo, planner, cfg, round_index=k if reseed else 0, trace_dir=trace_dir)
        for rec in report_for(traces, scenes, todo, cfg.alpha).records:
            current[rec.episode_id] = rec
        report = MetricReport([current[e.episode_id] for e in episodes])
        if cfg.output_dir:
            write_report(report, cfg.output_dir, f"report_round{k + 1}")
        reports.append(report)
    return reports


def slice_long_horizon(report: MetricReport, threshold: int = LONG_HORIZON_STEPS) -> MetricReport:
    """Episodes with strictly more than ``threshold`` steps; aggregates recomputed on the slice."""
    return MetricReport([r for r in report.records if r.steps > threshold], threshold)


def replay_pruning(scene: Scene, trace: TraceRecord, cfg: PruneConfig):
    """Re-walk a trace's trajectory through the memory module.

    Yields ``(clock, current, scores, pruned)`` per step, where ``scores``
    covers every eligible node before the prune. Only observed places are
    replayed, so an arrival cut off by the step cap is skipped.
    """
    topo = TopoMap()
    for vid in [s.current for s in trace.steps]:
        memgraph.observe_and_update(topo, observe(scene, vid))
        scores = memgraph.score_all(topo, cfg) if topo.clock >= cfg.t_start else {}
        _, pruned = memgraph.prune(topo, cfg)
        yield topo.clock, vid, scores, pruned
