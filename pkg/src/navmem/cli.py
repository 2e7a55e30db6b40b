"""Command-line entry point: ``navmem {run,eval,refine,slice,prune-sim,ios-eval,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .client import ChatClient
from .harness import (RunConfig, load_config, load_trace, refine_rounds, replay_pruning, run_all,
                      run_corpus, slice_long_horizon, write_report, report_for)
from .metrics import MetricReport, evaluate_ios
from .planner import (ExternalPlanner, FrontierGreedyPlanner, OraclePlanner, Planner, RandomPlanner,
                      ReplayPlanner)
from .spatial import load_ios
from .synth import random_corpus
from .world import action_from_str, load_episodes, load_scene, load_scenes, save_episodes, save_scene

log = logging.getLogger("navmem")


def make_planner(cfg: RunConfig) -> Planner:
    opts = cfg.planner_options
    if cfg.planner == "oracle":
        return OraclePlanner()
    if cfg.planner == "frontier":
        return FrontierGreedyPlanner()
    if cfg.planner == "random":
        return RandomPlanner(cfg.seed, float(opts.get("stop_weight", 1.0)))
    if cfg.planner == "replay":
        raw = json.loads(Path(opts["script"]).read_text())
        if isinstance(raw, dict):
            return ReplayPlanner(scripts={k: [action_from_str(a) for a in v] for k, v in raw.items()})
        return ReplayPlanner([action_from_str(a) for a in raw])
    if cfg.planner == "external":
        client = ChatClient(opts.get("base_url", "https://api.openai.com/v1"),
                            opts.get("model", "gpt-4o"),
                            temperature=float(opts.get("temperature", 0.0)),
                            max_in_flight=cfg.workers())
        return ExternalPlanner(client, cfg.max_retries)
    raise SystemExit(f"unknown planner {cfg.planner!r}")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--scenes", nargs="+", help="scene files or directories of scene files")
    p.add_argument("--episodes", help="episode file")
    p.add_argument("--planner", choices=["oracle", "frontier", "random", "replay", "external"])
    p.add_argument("--seed", type=int)
    p.add_argument("--no-pruning", action="store_true")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--max-retries", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--extractor", choices=["rule", "external", "none"])
    p.add_argument("--variant", choices=["r2r", "reverie"])
    p.add_argument("--t-start", type=int)
    p.add_argument("--n-remove", type=int)
    p.add_argument("--script", help="replay planner: JSON action list, or {episode_id: [...]}")
    p.add_argument("--base-url")
    p.add_argument("--model")
    p.add_argument("--temperature")
    p.add_argument("--stop-weight")


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    kw = {}
    for name in ("planner", "seed", "parallelism", "max_retries", "output_dir", "extractor", "variant",
                 "episodes", "scenes"):
        value = getattr(args, name, None)
        if value is not None:
            kw[name] = value
    if args.no_pruning:
        kw["pruning"] = False
    prune_kw = {k: getattr(args, k) for k in ("t_start", "n_remove") if getattr(args, k) is not None}
    opts = dict(cfg.planner_options)
    for name in ("script", "base_url", "model", "temperature", "stop_weight"):
        if getattr(args, name) is not None:
            opts[name] = getattr(args, name)
    return replace(cfg, prune=replace(cfg.prune, **prune_kw), planner_options=opts, **kw)


def _load_inputs(cfg: RunConfig):
    if not cfg.scenes or not cfg.episodes:
        raise SystemExit("--scenes and --episodes are required (flag or config)")
    scenes = load_scenes(cfg.scenes)
    episodes = load_episodes(cfg.episodes)
    for ep in episodes:
        if ep.scene_id not in scenes:
            raise SystemExit(f"episode {ep.episode_id} refers to unknown scene {ep.scene_id}")
        ep.check_against(scenes[ep.scene_id])
    return scenes, episodes


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    scenes, episodes = _load_inputs(cfg)
    if args.episode_id is not None:
        episodes = [e for e in episodes if e.episode_id == args.episode_id]
        if not episodes:
            raise SystemExit(f"no episode {args.episode_id!r}")
    episodes = episodes[:1]
    trace_dir = Path(cfg.output_dir) / "traces" if cfg.output_dir else None
    trace = run_all(scenes, episodes, make_planner(cfg), cfg, trace_dir=trace_dir)[0]
    if trace_dir is None:
        sys.stdout.write(trace.to_jsonl())
    print(report_for([trace], scenes, episodes, cfg.alpha).summary(), file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    cfg = config_from_args(args)
    scenes, episodes = _load_inputs(cfg)
    report = run_corpus(scenes, episodes, make_planner(cfg), cfg)
    print(report.summary())
    if not cfg.output_dir:
        print(report.to_json())
    return 0


def cmd_refine(args) -> int:
    cfg = config_from_args(args)
    scenes, episodes = _load_inputs(cfg)
    reports = refine_rounds(scenes, episodes, make_planner(cfg), args.rounds, cfg, reseed=not args.no_reseed)
    for k, r in enumerate(reports, 1):
        print(f"round {k}: {r.summary()}")
    return 0


def cmd_slice(args) -> int:
    report = MetricReport.from_dict(json.loads(Path(args.report).read_text()))
    sliced = slice_long_horizon(report, args.min_steps)
    if sliced.empty:
        print(f"no episodes with more than {args.min_steps} steps")
    else:
        print(sliced.summary())
    if args.output_dir:
        write_report(sliced, args.output_dir, f"report_steps_gt{args.min_steps}")
    return 0


def cmd_prune_sim(args) -> int:
    cfg = config_from_args(args)
    scene = load_scene(args.scene)
    trace = load_trace(args.trace)
    for clock, current, scores, pruned in replay_pruning(scene, trace, cfg.prune):
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        shown = ", ".join(f"{v}={s:.2f}" for v, s in ranked) or "-"
        removed = ", ".join(v for v, _ in pruned) or "-"
        print(f"t={clock:3d} at {current}  scores: {shown}  pruned: {removed}")
    return 0


def cmd_ios_eval(args) -> int:
    rep = evaluate_ios(load_ios(args.pred), load_ios(args.truth))
    print(json.dumps({"F1DO": rep.f1do, "F1IO": rep.f1io, "F1": rep.f1, "NDCG": rep.ndcg,
                      "count": rep.count}, indent=1))
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    scenes, episodes = random_corpus(args.episodes, seed=args.seed, n_scenes=args.scenes_count,
                                     rows=args.rows, cols=args.cols, max_steps=args.max_steps)
    for s in scenes.values():
        save_scene(s, out / "scenes" / f"{s.scene_id}.json")
    save_episodes(episodes, out / "episodes.json")
    print(f"wrote {len(scenes)} scenes and {len(episodes)} episodes to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="navmem", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single episode and print its trace")
    _add_run_flags(p)
    p.add_argument("--episode-id")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="run a corpus and write a metric report")
    _add_run_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("refine", help="cumulative re-runs of failed episodes")
    _add_run_flags(p)
    p.add_argument("--rounds", type=int, default=5)
    p.add_argument("--no-reseed", action="store_true")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("slice", help="re-aggregate a report over long episodes")
    p.add_argument("--report", required=True)
    p.add_argument("--min-steps", type=int, default=10, help="keep episodes with more steps than this")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("prune-sim", help="replay a trace through the memory module")
    _add_run_flags(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_prune_sim)

    p = sub.add_parser("ios-eval", help="F1/NDCG of predicted object lists")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_ios_eval)

    p = sub.add_parser("synth", help="generate a synthetic grid corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes-count", type=int, default=5)
    p.add_argument("--rows", type=int, default=5)
    p.add_argument("--cols", type=int, default=6)
    p.add_argument("--max-steps", type=int, default=40)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
