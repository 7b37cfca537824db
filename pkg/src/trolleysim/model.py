"""Domain types and structural validation for trolley scenarios.

A Scenario is one forced-choice dilemma: a spawn pose, a walled corridor,
a required target marker, victim groups assigned to a road side, and the
actors (pedestrians, vehicles, props) that can be collided with. A
Simulation is an ordered sequence of scenarios.

All types are immutable values after construction and safe to share
between threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

TRAIT_RE = re.compile(r"[a-z0-9_]+\Z")
ACTOR_NAME_RE = re.compile(r"[A-Za-z0-9_.\-]+\Z")

# Collider radius defaults, meters. The subject car is not an ActorSpec;
# its radius lives in SimParams but the corridor width rule needs it here.
DEFAULT_PEDESTRIAN_RADIUS = 0.3
DEFAULT_VEHICLE_RADIUS = 1.0
DEFAULT_PROP_RADIUS = 0.5
SUBJECT_CAR_RADIUS = 1.2
MAX_ACTOR_RADIUS = 5.0


class UnknownGroupError(KeyError):
    """Raised when a group_id is not declared in the scenario's groups map."""


class WrongPhaseError(RuntimeError):
    """Raised when an operation requires a different episode phase."""


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"
    UNSPECIFIED = "unspecified"


class ActorKind(str, Enum):
    PEDESTRIAN = "pedestrian"
    VEHICLE = "vehicle"
    PROP = "prop"


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


def canonical_heading(heading: float) -> float:
    """Snap a heading (radians) to the nearest value representable as
    ``math.radians(d)`` for some float ``d``.

    The degree<->radian float maps are not mutual inverses; without this
    snap (at most ~0.6 ulp) a heading could fail to survive the text
    format's heading_deg field bit-exactly.
    """
    d = math.degrees(heading)
    candidates = [d]
    up = down = d
    for _ in range(2):
        up = math.nextafter(up, math.inf)
        down = math.nextafter(down, -math.inf)
        candidates.extend((up, down))
    return min((math.radians(c) for c in candidates), key=lambda r: (abs(r - heading), r))


def heading_to_degrees(heading: float) -> float:
    """Exact-preimage inverse of :func:`canonical_heading`.

    Returns a degree value d with ``math.radians(d) == heading``, preferring
    the shortest decimal repr so serialized files stay human-friendly.
    Falls back to ``math.degrees(heading)`` if no exact preimage exists
    (only possible for headings that bypassed canonicalization).
    """
    d = math.degrees(heading)
    candidates = [d]
    up = down = d
    for _ in range(2):
        up = math.nextafter(up, math.inf)
        down = math.nextafter(down, -math.inf)
        candidates.extend((up, down))
    exact = [c for c in candidates if math.radians(c) == heading]
    if not exact:
        return d
    return min(exact, key=lambda c: (len(repr(c)), repr(c)))


@dataclass(frozen=True)
class VictimAttributes:
    """Pedestrian descriptor: age, gender, victim-group membership, traits.

    group_size is intentionally not stored; it is derived from the scenario
    (see :meth:`Scenario.group_size`) and re-emitted on serialization.
    """

    age: int
    gender: Gender
    group_id: int
    traits: tuple[str, ...] = ()


@dataclass(frozen=True)
class ActorSpec:
    """One collidable object: a pedestrian, parked vehicle, or static prop."""

    kind: ActorKind
    name: str
    x: float
    y: float
    radius: float
    attributes: VictimAttributes | None = None
    label: str = ""

    @classmethod
    def pedestrian(
        cls,
        name: str,
        x: float,
        y: float,
        attributes: VictimAttributes,
        radius: float = DEFAULT_PEDESTRIAN_RADIUS,
    ) -> ActorSpec:
        return cls(ActorKind.PEDESTRIAN, name, x, y, radius, attributes=attributes)

    @classmethod
    def vehicle(
        cls, name: str, x: float, y: float, label: str, radius: float = DEFAULT_VEHICLE_RADIUS
    ) -> ActorSpec:
        return cls(ActorKind.VEHICLE, name, x, y, radius, label=label)

    @classmethod
    def prop(
        cls, name: str, x: float, y: float, label: str, radius: float = DEFAULT_PROP_RADIUS
    ) -> ActorSpec:
        return cls(ActorKind.PROP, name, x, y, radius, label=label)


@dataclass(frozen=True)
class Corridor:
    """Invisible barrier walls: side walls at x_min/x_max, far wall at y_end."""

    x_min: float
    x_max: float
    y_end: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min


@dataclass(frozen=True)
class Spawn:
    """Subject car start pose. heading is radians, 0 = +y road axis,
    positive = rightward (+x); canonicalized for text round-trips."""

    x: float
    y: float
    heading: float
    speed: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", canonical_heading(self.heading))


@dataclass(frozen=True)
class Scenario:
    """One trolley problem. target is required for a scenario to be valid
    (it registers the scenario with the recording pipeline) but is optional
    here so validation can report its absence."""

    test_num: int
    name: str
    spawn: Spawn
    corridor: Corridor
    groups: dict[int, Side] = field(default_factory=dict)
    actors: tuple[ActorSpec, ...] = ()
    target: tuple[float, float] | None = None

    def pedestrians(self) -> list[ActorSpec]:
        return [a for a in self.actors if a.kind is ActorKind.PEDESTRIAN]

    def group_members(self, group_id: int) -> list[ActorSpec]:
        return [
            a
            for a in self.pedestrians()
            if a.attributes is not None and a.attributes.group_id == group_id
        ]

    def group_size(self, group_id: int) -> int:
        return len(self.group_members(group_id))

    def side_of(self, actor: ActorSpec) -> Side:
        # Road axis is +y through spawn.x; ties (x equal) classify as right.
        return Side.LEFT if actor.x < self.spawn.x else Side.RIGHT

    def actor_by_name(self, name: str) -> ActorSpec | None:
        for a in self.actors:
            if a.name == name:
                return a
        return None


@dataclass(frozen=True)
class Mode:
    """Run every scenario in order, or a single one selected by test_num."""

    kind: str  # "all" | "single"
    test_num: int | None = None

    @classmethod
    def all(cls) -> Mode:
        return cls("all")

    @classmethod
    def single(cls, test_num: int) -> Mode:
        return cls("single", test_num)


@dataclass(frozen=True)
class Simulation:
    scenarios: tuple[Scenario, ...]
    mode: Mode = field(default_factory=Mode.all)

    def scenario_by_test_num(self, test_num: int) -> Scenario | None:
        for s in self.scenarios:
            if s.test_num == test_num:
                return s
        return None


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    actor: str = ""
    test_num: int | None = None

    def sort_key(self) -> tuple:
        return (0 if self.severity == "error" else 1, self.code, self.actor, self.message)


def _check_actor(scenario: Scenario, actor: ActorSpec, out: list[Diagnostic]) -> None:
    t = scenario.test_num

    def err(code: str, message: str) -> None:
        out.append(Diagnostic("error", code, message, actor=actor.name, test_num=t))

    if not ACTOR_NAME_RE.match(actor.name):
        err("BAD_NAME", f"actor name {actor.name!r} is not a bare identifier")
    if not (0.0 < actor.radius <= MAX_ACTOR_RADIUS):
        err("BAD_RADIUS", f"radius {actor.radius} outside (0, {MAX_ACTOR_RADIUS}]")
    if actor.kind is ActorKind.PEDESTRIAN:
        if actor.attributes is None:
            err("BAD_ATTRIBUTES", "pedestrian has no victim attributes")
            return
        attrs = actor.attributes
        if attrs.age < 0:
            err("BAD_AGE", f"age {attrs.age} is negative")
        for trait in attrs.traits:
            if not TRAIT_RE.match(trait):
                err("BAD_TRAIT", f"trait {trait!r} does not match [a-z0-9_]+")
        if attrs.group_id not in scenario.groups:
            err("UNKNOWN_GROUP", f"group {attrs.group_id} is not declared in this scenario")
    else:
        if actor.attributes is not None:
            err("BAD_ATTRIBUTES", f"{actor.kind.value} actor carries victim attributes")
        if not ACTOR_NAME_RE.match(actor.label):
            err("BAD_LABEL", f"{actor.kind.value} kind label {actor.label!r} is not a bare identifier")


def validate_scenario(scenario: Scenario) -> list[Diagnostic]:
    """Check every structural invariant; returns [] iff the scenario is valid.

    Errors make a scenario unusable; warnings (EMPTY_SIDE) flag dilemmas that
    are not actually forced choices. Deterministically ordered by
    (severity, code, actor name).
    """
    out: list[Diagnostic] = []
    t = scenario.test_num

    def err(code: str, message: str) -> None:
        out.append(Diagnostic("error", code, message, test_num=t))

    if scenario.test_num < 0:
        err("BAD_TEST_NUM", f"test_num {scenario.test_num} is negative")
    if any(ch in scenario.name for ch in '"\t\r\n') or not scenario.name.isprintable():
        err("BAD_SCENARIO_NAME", "scenario name contains quotes or control characters")
    if scenario.target is None:
        err("MISSING_TARGET", "scenario has no target marker")
    c = scenario.corridor
    if not (c.x_min < c.x_max):
        err("BAD_CORRIDOR", f"x_min {c.x_min} is not below x_max {c.x_max}")
    elif c.width < 2 * SUBJECT_CAR_RADIUS:
        err(
            "NARROW_CORRIDOR",
            f"corridor width {c.width} is below twice the car radius {SUBJECT_CAR_RADIUS}",
        )
    sp = scenario.spawn
    if not (c.x_min <= sp.x <= c.x_max and sp.y <= c.y_end):
        err("SPAWN_OUTSIDE_CORRIDOR", f"spawn ({sp.x}, {sp.y}) is outside the corridor")
    if sp.speed < 0:
        err("BAD_SPEED", f"spawn speed {sp.speed} is negative")

    seen: set[str] = set()
    for actor in scenario.actors:
        if actor.name in seen:
            out.append(
                Diagnostic(
                    "error",
                    "DUPLICATE_NAME",
                    f"actor name {actor.name!r} is used more than once",
                    actor=actor.name,
                    test_num=t,
                )
            )
        seen.add(actor.name)
        _check_actor(scenario, actor, out)

    for side in (Side.LEFT, Side.RIGHT):
        if not any(scenario.side_of(a) is side for a in scenario.actors):
            out.append(
                Diagnostic(
                    "warning",
                    "EMPTY_SIDE",
                    f"no collidable actor on the {side.value} side",
                    test_num=t,
                )
            )

    out.sort(key=Diagnostic.sort_key)
    return out


def group_member_names(scenario: Scenario, group_id: int) -> str:
    """Canonical delineated string for a victim group.

    Members sorted by actor name; fields joined as
    ``name:age:gender:trait1,trait2``; members joined by ``|``. Byte-stable
    across runs for identical scenarios, so logs stay diffable.
    """
    if group_id not in scenario.groups:
        raise UnknownGroupError(group_id)
    members = sorted(scenario.group_members(group_id), key=lambda a: a.name)
    parts = []
    for m in members:
        attrs = m.attributes
        assert attrs is not None
        parts.append(f"{m.name}:{attrs.age}:{attrs.gender.value}:{','.join(attrs.traits)}")
    return "|".join(parts)
