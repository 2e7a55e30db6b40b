"""Instruction/object/layout data, object extraction and box projection.

Object names are compared after lowercasing and trimming; nothing fancier.
"""

from __future__ import annotations

import ast
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .world import ObjectAnnotation

VISIBILITY_RANGE = 3.0
OCCLUSION_OVERLAP = 0.5

_TOKEN = re.compile(r"[a-z0-9]+")


def norm_name(name: str) -> str:
    return name.strip().lower()


def dedupe(names: Iterable[str]) -> List[str]:
    seen, out = set(), []
    for n in names:
        key = norm_name(n)
        if key and key not in seen:
            seen.add(key)
            out.append(n.strip())
    return out


class ParseError(ValueError):
    """A model reply could not be parsed; ``raw`` keeps the reply verbatim."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class IOSample:
    instruction: str
    direct_objects: Tuple[str, ...] = ()
    inferred_objects: Tuple[str, ...] = ()
    layout: str = ""

    def __post_init__(self):
        for lst in (self.direct_objects, self.inferred_objects):
            if any(not norm_name(n) for n in lst):
                raise ValueError("object names must be nonempty")
            if len({norm_name(n) for n in lst}) != len(lst):
                raise ValueError(f"duplicate object names in {lst!r}")

    def to_dict(self) -> dict:
        return {"instruction": self.instruction, "direct_objects": list(self.direct_objects),
                "inferred_objects": list(self.inferred_objects), "layout": self.layout}

    @classmethod
    def from_dict(cls, d: dict) -> "IOSample":
        return cls(d["instruction"], tuple(dedupe(d.get("direct_objects", []))),
                   tuple(dedupe(d.get("inferred_objects", []))), d.get("layout") or "")


def load_ios(path: Union[str, Path]) -> List[IOSample]:
    return [IOSample.from_dict(d) for d in json.loads(Path(path).read_text())]


def save_ios(samples: Sequence[IOSample], path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps([s.to_dict() for s in samples], indent=1))


@dataclass(frozen=True)
class Extraction:
    direct: Tuple[str, ...] = ()
    inferred: Tuple[str, ...] = ()
    layout: Optional[str] = None

    @property
    def objects(self) -> List[str]:
        return dedupe([*self.direct, *self.inferred])

    @classmethod
    def from_sample(cls, s: IOSample) -> "Extraction":
        return cls(s.direct_objects, s.inferred_objects, s.layout or None)


# -- extraction --------------------------------------------------------------


def extract_objects_rule_based(instruction: str, vocabulary: Iterable[str]) -> Extraction:
    """Vocabulary entries found as token runs in the instruction, by first occurrence.

    Scanning is greedy from the left; at each position the longest matching
    entry wins and its tokens are consumed.
    """
    vocab = {}
    for entry in vocabulary:
        toks = tuple(_TOKEN.findall(entry.lower()))
        if toks:
            vocab.setdefault(toks, entry.strip())
    if not vocab:
        raise ValueError("vocabulary must be nonempty")
    longest = max(len(t) for t in vocab)
    tokens = _TOKEN.findall(instruction.lower())
    found: List[str] = []
    i = 0
    while i < len(tokens):
        for n in range(min(longest, len(tokens) - i), 0, -1):
            entry = vocab.get(tuple(tokens[i:i + n]))
            if entry is not None:
                if entry not in found:
                    found.append(entry)
                i += n
                break
        else:
            i += 1
    return Extraction(tuple(found))


OBJECT_PROMPT = """You are assisting an indoor navigation agent.
Read the navigation instruction and list the objects that matter for following it.
"Direct Objects" are objects explicitly mentioned in the instruction.
"Inferred Objects" are objects not mentioned but likely to be seen along the route or at the destination, most relevant first.
Answer with exactly two lines, each a JSON list of lowercase object names:
Direct Objects: [...]
Inferred Objects: [...]"""

LAYOUT_PROMPT = """You are assisting an indoor navigation agent.
Given the navigation instruction and the objects relevant to it, describe in two or three sentences the likely spatial layout of the destination: what room it is and how the objects are arranged there.
Answer with a single line:
Destination Spatial Layout: <description>"""

_LIST_LINE = re.compile(r"^\s*(direct|inferred)\s+objects\s*:\s*(\[.*\])\s*$", re.I | re.M)
_LAYOUT_LINE = re.compile(r"^\s*destination\s+spatial\s+layout\s*:\s*(.+?)\s*$", re.I | re.M)


def _parse_list(text: str, raw: str) -> List[str]:
    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        raise ParseError(f"not a list literal: {text!r}", raw) from None
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        raise ParseError(f"expected a list of strings, got {text!r}", raw)
    return dedupe(value)


def parse_extraction_reply(raw: str) -> Extraction:
    lists = {}
    for m in _LIST_LINE.finditer(raw):
        lists[m.group(1).lower()] = _parse_list(m.group(2), raw)
    if "direct" not in lists:
        raise ParseError("reply has no 'Direct Objects:' line", raw)
    layout = _LAYOUT_LINE.search(raw)
    return Extraction(tuple(lists["direct"]), tuple(lists.get("inferred", [])),
                      layout.group(1).strip('"') if layout else None)


def extract_objects_external(instruction: str, client, with_layout: bool = False) -> Extraction:
    """Ask a chat model for the object lists (and optionally the destination layout).

    ``client`` needs a ``complete(system, user) -> str`` method.
    Transport errors propagate; malformed replies raise :class:`ParseError`.
    """
    raw = client.complete(OBJECT_PROMPT, f"Instruction: {instruction}")
    ext = parse_extraction_reply(raw)
    if with_layout and ext.layout is None:
        user = (f"Instruction: {instruction}\n"
                f"Objects: {json.dumps(ext.objects)}")
        reply = client.complete(LAYOUT_PROMPT, user)
        m = _LAYOUT_LINE.search(reply)
        if m is None:
            raise ParseError("reply has no 'Destination Spatial Layout:' line", reply)
        ext = Extraction(ext.direct, ext.inferred, m.group(1).strip('"'))
    return ext


def enhance_observation(visible: Iterable[str], task_objects: Sequence[str]) -> List[str]:
    """Task objects that are actually in view, in task order."""
    seen = {norm_name(v) for v in visible}
    return [t for t in task_objects if norm_name(t) in seen]


# -- projection --------------------------------------------------------------


@dataclass(frozen=True)
class CameraPose:
    position: Tuple[float, float, float]
    heading: float
    elevation: float
    focal: float = 500.0
    width: int = 1000
    height: int = 1000

    def __post_init__(self):
        if self.focal <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("focal length and image size must be positive")

    def basis(self) -> np.ndarray:
        """Rows: right, up, forward (world coordinates)."""
        ch, sh = math.cos(self.heading), math.sin(self.heading)
        ce, se = math.cos(self.elevation), math.sin(self.elevation)
        forward = np.array([sh * ce, ch * ce, se])
        right = np.array([ch, -sh, 0.0])
        up = np.cross(right, forward)
        return np.stack([right, up, forward])


@dataclass(frozen=True)
class Bbox2D:
    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    def intersection(self, other: "Bbox2D") -> float:
        iw = min(self.x + self.w, other.x + other.w) - max(self.x, other.x)
        ih = min(self.y + self.h, other.y + other.h) - max(self.y, other.y)
        return max(0.0, iw) * max(0.0, ih)

    def as_list(self) -> List[float]:
        return [self.x, self.y, self.w, self.h]


def box_vertices(obj: ObjectAnnotation) -> np.ndarray:
    axes = np.asarray(obj.axes, dtype=float) * np.asarray(obj.half_extents)[:, None]
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    return np.asarray(obj.center) + signs @ axes


def project_bbox(obj: ObjectAnnotation, camera: CameraPose) -> Optional[Bbox2D]:
    """Image-space hull of the box's vertices in front of the camera, or None if not visible."""
    cam = (box_vertices(obj) - np.asarray(camera.position)) @ camera.basis().T
    cam = cam[cam[:, 2] > 0]
    if len(cam) == 0:
        return None
    u = camera.width / 2 + camera.focal * cam[:, 0] / cam[:, 2]
    v = camera.height / 2 - camera.focal * cam[:, 1] / cam[:, 2]
    x0, x1 = max(u.min(), 0.0), min(u.max(), float(camera.width))
    y0, y1 = max(v.min(), 0.0), min(v.max(), float(camera.height))
    if x1 <= x0 or y1 <= y0:
        return None
    return Bbox2D(float(x0), float(y0), float(x1 - x0), float(y1 - y0))


def filter_visible(objects: Sequence[ObjectAnnotation], camera: CameraPose,
                   others: Sequence[ObjectAnnotation] = ()) -> List[Tuple[str, Bbox2D]]:
    """Objects within range whose box is not mostly covered by a strictly closer box.

    ``others`` only act as occluders.
    """
    def dist(o):
        return math.dist(o.center, camera.position)

    occluders = []
    for o in [*objects, *others]:
        box = project_bbox(o, camera)
        if box is not None:
            occluders.append((dist(o), box))

    out = []
    for o in objects:
        d = dist(o)
        if d > VISIBILITY_RANGE:
            continue
        box = project_bbox(o, camera)
        if box is None:
            continue
        if any(od < d and box.intersection(ob) >= OCCLUSION_OVERLAP * box.area for od, ob in occluders):
            continue
        out.append((o.name, box))
    return out
