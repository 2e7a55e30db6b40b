"""Prompt assembly and pluggable planners for the navigation decision step."""

from __future__ import annotations

import logging
import math
import random
import re
import string
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .memgraph import MemoryContext, TopoMap, render_map_context
from .spatial import Extraction, ParseError, enhance_observation, norm_name
from .viewgeom import CandidateView
from .world import STOP, Action, Episode, IllegalActionError, MoveTo, Scene, Stop

log = logging.getLogger(__name__)

R2R_INSTRUCTION_NOTE = (
    "'Instruction' is a global, step-by-step guide. Follow it in order and stop "
    "only once every part of it has been carried out."
)
REVERIE_INSTRUCTION_NOTE = (
    "'Instruction' serves as global guidance that you should follow. Your task is to "
    "locate the specified or hidden target object, stop, and disregard any actions "
    "related to the target object mentioned in the 'Instruction'. You should not overly "
    "focus on color details of landmarks or the target object described in the "
    "'Instruction', as these color descriptions may be inaccurate."
)

SYSTEM_TEMPLATE = """You are an embodied robot that navigates an indoor environment by following a natural-language instruction.
At every step you are at one place and can move to one of the adjacent places listed under 'Action Options', or stop.
{instruction_note}
'Trajectory' lists the places you have visited, in order. 'Map' lists how the places you remember are connected; places you have not needed for a while may have been forgotten.
'Supplementary Info' lists the objects seen at each remembered place.
'Possible Destination Info' describes the possible object spatial layout of the target destination. This is for reference only and may not be completely accurate.
'History' lists your previous actions and 'Previous Planning' is your plan from the last step.
Each action option names the place it leads to, its direction, its distance and the task-relevant objects visible toward it."""

RESPONSE_DIRECTIVE = """Respond with exactly two lines:
Thought: <your reasoning about where you are and what to do next>
Action: <the letter of one option>"""


def system_prompt(variant: str = "r2r") -> str:
    note = {"r2r": R2R_INSTRUCTION_NOTE, "reverie": REVERIE_INSTRUCTION_NOTE}[variant]
    return SYSTEM_TEMPLATE.format(instruction_note=note)


@dataclass(frozen=True)
class ActionOption:
    letter: str
    action: Action
    text: str


@dataclass
class PromptBundle:
    instruction: str
    memory: MemoryContext
    layout: Optional[str]
    history: List[str]
    previous_plan: str
    options: List[ActionOption]
    enhanced_objects: Dict[str, List[str]]
    current: str
    extraction: Extraction
    system: str
    topo: Optional[TopoMap] = field(default=None, repr=False, compare=False)

    def option_table(self) -> Dict[str, Action]:
        return {o.letter: o.action for o in self.options}

    def allowed(self) -> List[Action]:
        return [o.action for o in self.options]

    def user_text(self) -> str:
        parts = [f"Instruction: {self.instruction}", self.memory.text()]
        if self.layout:
            parts.append(f"Possible Destination Info: {self.layout}")
        parts.append("History: " + ("; ".join(self.history) if self.history else "none"))
        parts.append("Previous Planning: " + (self.previous_plan or "none"))
        parts.append("Action Options:")
        parts.extend(f"{o.letter}. {o.text}" for o in self.options)
        parts.append(RESPONSE_DIRECTIVE)
        return "\n".join(parts)

    def text(self) -> str:
        return self.system + "\n\n" + self.user_text()


def _option_letters(n: int) -> List[str]:
    if n > len(string.ascii_uppercase):
        raise ValueError(f"too many action options ({n})")
    return list(string.ascii_uppercase[:n])


def _describe_action(action: Action, topo: TopoMap) -> str:
    if isinstance(action, Stop):
        return "stop"
    return f"go to {topo.place(action.target)}"


def build_prompt(episode: Episode, topo: TopoMap, extraction: Extraction,
                 candidates: Sequence[CandidateView], history: Sequence[Action],
                 previous_plan: str = "", variant: str = "r2r") -> PromptBundle:
    """Assemble everything the planner sees at this step. Pure in its inputs."""
    cur = topo.current
    task = extraction.objects
    enhanced = {cur: enhance_observation(topo.nodes[cur].annotation, task)}
    options = []
    letters = _option_letters(len(candidates) + 1)
    for letter, cand in zip(letters, candidates):
        objs = enhance_observation(cand.visible, task)
        enhanced[cand.target] = objs
        heading, elevation = (round(math.degrees(a)) for a in cand.direction)
        text = (f"go to {topo.place(cand.target)} (heading {heading} deg, elevation {elevation} deg, "
                f"{cand.distance:.2f} m, view {cand.optimized_view}); "
                f"objects: {', '.join(objs) if objs else 'none'}")
        options.append(ActionOption(letter, MoveTo(cand.target), text))
    options.append(ActionOption(letters[-1], STOP, "stop"))
    return PromptBundle(
        instruction=episode.instruction,
        memory=render_map_context(topo),
        layout=extraction.layout or None,
        history=[f"step {i}: {_describe_action(a, topo)}" for i, a in enumerate(history)],
        previous_plan=previous_plan,
        options=options,
        enhanced_objects=enhanced,
        current=cur,
        extraction=extraction,
        system=system_prompt(variant),
        topo=topo,
    )


_ACTION_LINE = re.compile(r"^\s*\**action\**\s*:\s*\**\s*(.*?)\s*$", re.I | re.M)


def parse_response(raw: str, options: Dict[str, Action]) -> Action:
    """Map the last ``Action:`` line of a reply onto the option table."""
    lines = _ACTION_LINE.findall(raw)
    if not lines:
        raise ParseError("reply has no 'Action:' line", raw)
    value = lines[-1].strip()
    if re.match(r"stop\b", value, re.I):
        return STOP
    m = re.match(r"\(?([A-Za-z])\b", value)
    if m is None or m.group(1).upper() not in options:
        raise ParseError(f"unknown action option {value!r}", raw)
    return options[m.group(1).upper()]


@dataclass(frozen=True)
class Decision:
    action: Action
    thought: str = ""
    raw: str = ""
    error: Optional[str] = None


class Planner:
    """Base planner. Per-episode state lives on the instance returned by :meth:`for_episode`."""

    name = "planner"

    def for_episode(self, scene: Scene, episode: Episode, seed: int) -> "Planner":
        return self

    def decide(self, bundle: PromptBundle) -> Decision:
        raise NotImplementedError


def decide(planner: Planner, bundle: PromptBundle) -> Decision:
    decision = planner.decide(bundle)
    if decision.action not in bundle.allowed():
        raise IllegalActionError(f"planner chose {decision.action!r}, not among the options")
    return decision


class OraclePlanner(Planner):
    """Follows a metric shortest path to the goal using the full scene."""

    name = "oracle"

    def __init__(self, scene: Optional[Scene] = None, goal: Optional[str] = None):
        self.scene, self.goal = scene, goal
        self._to_goal = scene.shortest_distances(goal) if scene is not None else None

    def for_episode(self, scene, episode, seed):
        return OraclePlanner(scene, episode.goal)

    def decide(self, bundle):
        cur = bundle.current
        if cur == self.goal:
            return Decision(STOP, "at the goal")
        moves = [a for a in bundle.allowed() if isinstance(a, MoveTo) and a.target in self._to_goal]
        if not moves:
            return Decision(STOP, "goal unreachable")
        best = min(moves, key=lambda a: (self.scene.distance(cur, a.target) + self._to_goal[a.target],
                                         a.target))
        return Decision(best, f"shortest path continues to {best.target}")


class ReplayPlanner(Planner):
    """Plays back a fixed action script; stops when the script runs out."""

    name = "replay"

    def __init__(self, script: Sequence[Action] = (), scripts: Optional[Dict[str, Sequence[Action]]] = None):
        self.script = list(script)
        self.scripts = scripts
        self._i = 0

    def for_episode(self, scene, episode, seed):
        if self.scripts is not None:
            return ReplayPlanner(self.scripts.get(episode.episode_id, ()))
        return ReplayPlanner(self.script)

    def decide(self, bundle):
        if self._i >= len(self.script):
            return Decision(STOP, "script exhausted")
        action = self.script[self._i]
        self._i += 1
        return Decision(action, "replay")


class RandomPlanner(Planner):
    """Uniform choice among the options (Stop included), seeded per episode."""

    name = "random"

    def __init__(self, seed: int = 0, stop_weight: float = 1.0):
        self.rng = random.Random(seed)
        self.stop_weight = stop_weight

    def for_episode(self, scene, episode, seed):
        return RandomPlanner(seed, self.stop_weight)

    def decide(self, bundle):
        weights = [self.stop_weight if isinstance(a, Stop) else 1.0 for a in bundle.allowed()]
        action = self.rng.choices(bundle.allowed(), weights=weights)[0]
        return Decision(action, "random")


class FrontierGreedyPlanner(Planner):
    """Heads for the nearest unvisited map node; stops once every direct object is in view."""

    name = "frontier"

    def decide(self, bundle):
        direct = {norm_name(o) for o in bundle.extraction.direct}
        here = {norm_name(o) for o in bundle.enhanced_objects.get(bundle.current, [])}
        if direct and direct <= here:
            return Decision(STOP, "all instructed objects are in view")
        moves = {a.target: a for a in bundle.allowed() if isinstance(a, MoveTo)}
        if not moves:
            return Decision(STOP, "no way forward")
        topo = bundle.topo
        first = _first_step_to_frontier(topo, bundle.current, set(moves))
        if first is not None:
            return Decision(moves[first], f"exploring toward the frontier via {first}")
        # nothing unexplored in memory: go where we have been least recently
        stale = min(moves, key=lambda v: (_last_visit(topo, v), v))
        return Decision(moves[stale], f"revisiting {stale}")


def _last_visit(topo: TopoMap, v: str) -> int:
    rec = topo.nodes.get(v)
    return -1 if rec is None or rec.last_visit is None else rec.last_visit


def _hops_to_unvisited(topo: TopoMap, source: str, avoid: str) -> Optional[int]:
    if source not in topo.nodes:
        return None
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if u not in topo.visited:
            return dist[u]
        for n in topo.neighbors(u):
            if n not in dist and n != avoid:
                dist[n] = dist[u] + 1
                queue.append(n)
    return None


def _first_step_to_frontier(topo: TopoMap, start: str, moves) -> Optional[str]:
    """The move whose map distance to an unvisited node is smallest (ties by id)."""
    best = None
    for m in sorted(moves):
        d = _hops_to_unvisited(topo, m, avoid=start)
        if d is not None and (best is None or d < best[0]):
            best = (d, m)
    return best[1] if best else None


class ExternalPlanner(Planner):
    """Planner backed by a chat-completion client.

    Unparseable replies are retried ``max_retries`` times; after that the
    planner stops and reports the failure in ``Decision.error``.
    """

    name = "external"

    def __init__(self, client, max_retries: int = 2):
        self.client = client
        self.max_retries = max_retries
        self._previous = ""

    def for_episode(self, scene, episode, seed):
        return ExternalPlanner(self.client, self.max_retries)

    def decide(self, bundle):
        table = bundle.option_table()
        raw = ""
        error = None
        for attempt in range(self.max_retries + 1):
            try:
                raw = self.client.complete(bundle.system, bundle.user_text())
                action = parse_response(raw, table)
            except ParseError as e:
                error = f"parse failure: {e}"
                log.warning("attempt %d: %s", attempt + 1, error)
                continue
            except Exception as e:  # transport failures already retried by the client
                error = f"transport failure: {e}"
                log.warning("attempt %d: %s", attempt + 1, error)
                continue
            return Decision(action, _thought(raw), raw)
        return Decision(STOP, "", raw, error=error)


_THOUGHT = re.compile(r"^\s*\**thought\**\s*:\s*(.*?)(?=^\s*\**action\**\s*:|\Z)", re.I | re.M | re.S)


def _thought(raw: str) -> str:
    m = _THOUGHT.search(raw)
    return m.group(1).strip() if m else ""


PLANNERS = {
    "oracle": OraclePlanner,
    "frontier": FrontierGreedyPlanner,
    "random": RandomPlanner,
    "replay": ReplayPlanner,
    "external": ExternalPlanner,
}
