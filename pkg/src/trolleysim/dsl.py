"""Parser, serializer, and linter for the `.trly` scenario text format.

The format is line-oriented and diff-friendly: one directive per line,
space-separated key=value pairs, `#` comments, scenario blocks bracketed by
`scenario <test_num> "<name>"` ... `end`::

    scenario 0 "two vs one"
      spawn x=0 y=0 heading_deg=0 speed=5
      target x=0 y=50
      corridor x_min=-6 x_max=6 y_end=60
      group id=1 side=left
      group id=2 side=right
      ped name=p1 group=1 x=-2 y=40 age=30 gender=female traits=pregnant
      ped name=p2 group=2 x=2 y=40 age=8 gender=male
      prop name=c1 x=0 y=55 kind=cone
    end

Parsing collects every error instead of stopping at the first one, and
never raises on malformed input bytes; experiment designers iterate on
these files by hand.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

from .model import (
    ACTOR_NAME_RE,
    ActorKind,
    ActorSpec,
    Corridor,
    DEFAULT_PEDESTRIAN_RADIUS,
    DEFAULT_PROP_RADIUS,
    DEFAULT_VEHICLE_RADIUS,
    Diagnostic,
    Gender,
    Mode,
    Scenario,
    Side,
    Simulation,
    Spawn,
    VictimAttributes,
    heading_to_degrees,
    validate_scenario,
)

FILE_EXTENSION = ".trly"


@dataclass(frozen=True)
class SourceSpan:
    line: int  # 1-based
    column: int  # 1-based


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    code: str  # SYNTAX | DUPLICATE_NAME | MISSING_TARGET | MISSING_SPAWN |
    #          UNKNOWN_KEY | BAD_NUMBER | UNTERMINATED_SCENARIO
    message: str


class SimulationParseError(ValueError):
    """Parse failed; carries every error found, not just the first."""

    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        first = errors[0]
        super().__init__(
            f"{len(errors)} parse error(s); first at "
            f"{first.span.line}:{first.span.column}: {first.code}: {first.message}"
        )


class InvalidSimulationError(ValueError):
    """Serialization refused: the simulation fails validation."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__(f"INVALID_SIMULATION: {len(diagnostics)} error(s)")


@dataclass(frozen=True)
class FileDiagnostic:
    """A lint finding tied back to a position in the source text."""

    severity: str
    span: SourceSpan
    code: str
    message: str


@dataclass
class _Token:
    text: str
    column: int


_SCENARIO_RE = re.compile(r'\s*scenario\s+(\S+)\s+"([^"]*)"\s*$')


def _strip_comment(line: str) -> str:
    in_quote = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return line[:i]
    return line


def _tokens(line: str) -> list[_Token]:
    return [_Token(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def _parse_int(text: str) -> int:
    return int(text, 10)


def _parse_identifier(text: str) -> str:
    if not ACTOR_NAME_RE.match(text):
        raise ValueError("not a bare identifier")
    return text


def _parse_gender(text: str) -> Gender:
    try:
        return Gender(text)
    except ValueError:
        raise ValueError("expected male, female, or unspecified") from None


def _parse_side(text: str) -> Side:
    try:
        return Side(text)
    except ValueError:
        raise ValueError("expected left or right") from None


def _parse_traits(text: str) -> tuple[str, ...]:
    return tuple(t for t in text.split(",") if t)


# directive -> (required key -> converter, optional key -> converter)
_DIRECTIVES: dict[str, tuple[dict[str, Callable], dict[str, Callable]]] = {
    "spawn": (
        {"x": _parse_float, "y": _parse_float, "heading_deg": _parse_float, "speed": _parse_float},
        {},
    ),
    "target": ({"x": _parse_float, "y": _parse_float}, {}),
    "corridor": (
        {"x_min": _parse_float, "x_max": _parse_float, "y_end": _parse_float},
        {},
    ),
    "group": ({"id": _parse_int, "side": _parse_side}, {}),
    "ped": (
        {
            "name": _parse_identifier,
            "group": _parse_int,
            "x": _parse_float,
            "y": _parse_float,
            "age": _parse_int,
            "gender": _parse_gender,
        },
        {"traits": _parse_traits, "radius": _parse_float},
    ),
    "vehicle": (
        {"name": _parse_identifier, "x": _parse_float, "y": _parse_float, "kind": _parse_identifier},
        {"radius": _parse_float},
    ),
    "prop": (
        {"name": _parse_identifier, "x": _parse_float, "y": _parse_float, "kind": _parse_identifier},
        {"radius": _parse_float},
    ),
}

_NUMERIC = (_parse_float, _parse_int)


class _Block:
    """One scenario block under construction."""

    def __init__(self, test_num: int, name: str, span: SourceSpan):
        self.test_num = test_num
        self.name = name
        self.span = span
        self.spawn: Spawn | None = None
        self.target: tuple[float, float] | None = None
        self.corridor: Corridor | None = None
        self.groups: dict[int, Side] = {}
        self.actors: list[ActorSpec] = []
        self.actor_spans: dict[str, SourceSpan] = {}
        self.seen: set[str] = set()  # directive words encountered, even if bad
        self.failed = False  # some directive inside did not parse


class _Parser:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.errors: list[ParseError] = []
        self.scenarios: list[Scenario] = []
        self.scenario_spans: list[SourceSpan] = []
        self.block: _Block | None = None

    def error(self, span: SourceSpan, code: str, message: str) -> None:
        self.errors.append(ParseError(span, code, message))

    def run(self) -> None:
        for lineno, raw in enumerate(self.lines, start=1):
            line = _strip_comment(raw.rstrip("\r"))
            if not line.strip():
                continue
            self.dispatch(lineno, line)
        if self.block is not None:
            last = max(1, len(self.lines))
            self.error(
                SourceSpan(last, 1),
                "UNTERMINATED_SCENARIO",
                f"scenario {self.block.test_num} is missing its end directive",
            )

    def dispatch(self, lineno: int, line: str) -> None:
        tokens = _tokens(line)
        head = tokens[0]
        span = SourceSpan(lineno, head.column)
        if head.text == "scenario":
            self.start_block(lineno, line, span)
        elif head.text == "end":
            if len(tokens) > 1:
                self.error(
                    SourceSpan(lineno, tokens[1].column), "SYNTAX", "end takes no arguments"
                )
            self.end_block(span)
        elif head.text in _DIRECTIVES:
            if self.block is None:
                self.error(span, "SYNTAX", f"{head.text} directive outside a scenario block")
                return
            self.directive(lineno, head, tokens[1:])
        else:
            self.error(span, "SYNTAX", f"unknown directive {head.text!r}")
            if self.block is not None:
                self.block.failed = True

    def start_block(self, lineno: int, line: str, span: SourceSpan) -> None:
        if self.block is not None:
            self.error(span, "SYNTAX", "scenario block opened before the previous end")
            self.block = None  # previous block is abandoned
        m = _SCENARIO_RE.match(line)
        if not m:
            self.error(span, "SYNTAX", 'expected: scenario <test_num> "<name>"')
            return
        try:
            test_num = _parse_int(m.group(1))
        except ValueError:
            self.error(
                SourceSpan(lineno, line.index(m.group(1)) + 1),
                "BAD_NUMBER",
                f"test_num {m.group(1)!r} is not an integer",
            )
            return
        self.block = _Block(test_num, m.group(2), span)

    def end_block(self, span: SourceSpan) -> None:
        block = self.block
        if block is None:
            self.error(span, "SYNTAX", "end without an open scenario block")
            return
        self.block = None
        if block.spawn is None and "spawn" not in block.seen:
            self.error(span, "MISSING_SPAWN", f"scenario {block.test_num} has no spawn")
        if block.target is None and "target" not in block.seen:
            self.error(span, "MISSING_TARGET", f"scenario {block.test_num} has no target")
        if block.corridor is None and "corridor" not in block.seen:
            self.error(span, "SYNTAX", f"scenario {block.test_num} has no corridor")
        if block.failed or block.spawn is None or block.corridor is None or block.target is None:
            return
        scenario = Scenario(
            test_num=block.test_num,
            name=block.name,
            spawn=block.spawn,
            corridor=block.corridor,
            groups=block.groups,
            actors=tuple(block.actors),
            target=block.target,
        )
        bad = False
        for diag in validate_scenario(scenario):
            if diag.severity != "error":
                continue
            bad = True
            at = block.actor_spans.get(diag.actor, block.span)
            code = diag.code if diag.code in ("DUPLICATE_NAME", "MISSING_TARGET") else "SYNTAX"
            self.error(at, code, f"{diag.code}: {diag.message}")
        if not bad:
            self.scenarios.append(scenario)
            self.scenario_spans.append(block.span)

    def directive(self, lineno: int, head: _Token, args: list[_Token]) -> None:
        block = self.block
        assert block is not None
        block.seen.add(head.text)
        required, optional = _DIRECTIVES[head.text]
        values: dict[str, object] = {}
        ok = True
        for tok in args:
            key, eq, raw = tok.text.partition("=")
            span = SourceSpan(lineno, tok.column)
            if not eq:
                self.error(span, "SYNTAX", f"expected key=value, got {tok.text!r}")
                ok = False
                continue
            conv = required.get(key) or optional.get(key)
            if conv is None:
                self.error(span, "UNKNOWN_KEY", f"unknown key {key!r} for {head.text}")
                ok = False
                continue
            if key in values:
                self.error(span, "SYNTAX", f"duplicate key {key!r}")
                ok = False
                continue
            try:
                values[key] = conv(raw)
            except ValueError as exc:
                code = "BAD_NUMBER" if conv in _NUMERIC else "SYNTAX"
                self.error(span, code, f"bad value for {key}: {raw!r} ({exc})")
                ok = False
        missing = [k for k in required if k not in values]
        if missing:
            self.error(
                SourceSpan(lineno, head.column),
                "SYNTAX",
                f"{head.text} is missing required key(s): {', '.join(missing)}",
            )
            ok = False
        if not ok:
            block.failed = True
            return
        self.apply(lineno, head, values)

    def apply(self, lineno: int, head: _Token, values: dict) -> None:
        block = self.block
        assert block is not None
        span = SourceSpan(lineno, head.column)

        def duplicate(what: str) -> None:
            self.error(span, "SYNTAX", f"duplicate {what}")
            block.failed = True

        if head.text == "spawn":
            if block.spawn is not None:
                return duplicate("spawn directive")
            block.spawn = Spawn(
                values["x"], values["y"], math.radians(values["heading_deg"]), values["speed"]
            )
        elif head.text == "target":
            if block.target is not None:
                return duplicate("target directive")
            block.target = (values["x"], values["y"])
        elif head.text == "corridor":
            if block.corridor is not None:
                return duplicate("corridor directive")
            block.corridor = Corridor(values["x_min"], values["x_max"], values["y_end"])
        elif head.text == "group":
            if values["id"] in block.groups:
                return duplicate(f"group id={values['id']}")
            block.groups[values["id"]] = values["side"]
        else:
            name = values["name"]
            if name in block.actor_spans:
                self.error(span, "DUPLICATE_NAME", f"actor name {name!r} is used more than once")
                block.failed = True
                return
            block.actor_spans[name] = span
            if head.text == "ped":
                attrs = VictimAttributes(
                    age=values["age"],
                    gender=values["gender"],
                    group_id=values["group"],
                    traits=values.get("traits", ()),
                )
                actor = ActorSpec.pedestrian(
                    name,
                    values["x"],
                    values["y"],
                    attrs,
                    radius=values.get("radius", DEFAULT_PEDESTRIAN_RADIUS),
                )
            elif head.text == "vehicle":
                actor = ActorSpec.vehicle(
                    name,
                    values["x"],
                    values["y"],
                    values["kind"],
                    radius=values.get("radius", DEFAULT_VEHICLE_RADIUS),
                )
            else:
                actor = ActorSpec.prop(
                    name,
                    values["x"],
                    values["y"],
                    values["kind"],
                    radius=values.get("radius", DEFAULT_PROP_RADIUS),
                )
            block.actors.append(actor)


def _as_text(text: str | bytes) -> str:
    if isinstance(text, bytes):
        return text.decode("utf-8", errors="replace")
    return text


def parse_simulation(text: str | bytes) -> Simulation:
    """Parse `.trly` text into a Simulation (mode `all`, file order).

    Raises SimulationParseError carrying every error found. Structural
    scenario invariants are re-checked, so a returned Simulation's
    scenarios are individually valid (warnings aside).
    """
    parser = _Parser(_as_text(text))
    parser.run()
    if parser.errors:
        raise SimulationParseError(parser.errors)
    return Simulation(scenarios=tuple(parser.scenarios))


def lint_simulation(sim: Simulation) -> list[Diagnostic]:
    """Per-scenario diagnostics plus cross-scenario checks, in scenario order."""
    out: list[Diagnostic] = []
    if not sim.scenarios:
        out.append(Diagnostic("error", "EMPTY_SIMULATION", "simulation has no scenarios"))
    seen: dict[int, int] = {}
    for s in sim.scenarios:
        out.extend(validate_scenario(s))
        if s.test_num in seen:
            out.append(
                Diagnostic(
                    "error",
                    "DUPLICATE_TEST_NUM",
                    f"test_num {s.test_num} is used by more than one scenario",
                    test_num=s.test_num,
                )
            )
        seen.setdefault(s.test_num, 1)
    if sim.mode.kind == "single" and (
        sim.mode.test_num is None or sim.scenario_by_test_num(sim.mode.test_num) is None
    ):
        out.append(
            Diagnostic(
                "error",
                "UNKNOWN_TEST_NUM",
                f"mode single({sim.mode.test_num}) does not match any scenario",
            )
        )
    return out


def _fmt(value: float) -> str:
    # repr() is the shortest round-trip-exact decimal form
    return repr(float(value))


def _serialize_actor(actor: ActorSpec) -> str:
    if actor.kind is ActorKind.PEDESTRIAN:
        attrs = actor.attributes
        assert attrs is not None
        parts = [
            f"ped name={actor.name}",
            f"group={attrs.group_id}",
            f"x={_fmt(actor.x)}",
            f"y={_fmt(actor.y)}",
            f"age={attrs.age}",
            f"gender={attrs.gender.value}",
        ]
        if attrs.traits:
            parts.append(f"traits={','.join(attrs.traits)}")
        default = DEFAULT_PEDESTRIAN_RADIUS
    else:
        word = "vehicle" if actor.kind is ActorKind.VEHICLE else "prop"
        parts = [
            f"{word} name={actor.name}",
            f"x={_fmt(actor.x)}",
            f"y={_fmt(actor.y)}",
            f"kind={actor.label}",
        ]
        default = DEFAULT_VEHICLE_RADIUS if actor.kind is ActorKind.VEHICLE else DEFAULT_PROP_RADIUS
    if actor.radius != default:
        parts.append(f"radius={_fmt(actor.radius)}")
    return " ".join(parts)


def serialize_simulation(sim: Simulation) -> str:
    """Canonical `.trly` text: fixed directive order, shortest exact numbers,
    LF line endings. parse(serialize(sim)) == sim for every valid sim."""
    problems = [d for d in lint_simulation(sim) if d.severity == "error"]
    if problems:
        raise InvalidSimulationError(problems)
    blocks: list[str] = []
    for s in sim.scenarios:
        lines = [f'scenario {s.test_num} "{s.name}"']
        sp = s.spawn
        lines.append(
            f"  spawn x={_fmt(sp.x)} y={_fmt(sp.y)} "
            f"heading_deg={_fmt(heading_to_degrees(sp.heading))} speed={_fmt(sp.speed)}"
        )
        assert s.target is not None
        lines.append(f"  target x={_fmt(s.target[0])} y={_fmt(s.target[1])}")
        c = s.corridor
        lines.append(
            f"  corridor x_min={_fmt(c.x_min)} x_max={_fmt(c.x_max)} y_end={_fmt(c.y_end)}"
        )
        for gid in sorted(s.groups):
            lines.append(f"  group id={gid} side={s.groups[gid].value}")
        for actor in s.actors:
            lines.append("  " + _serialize_actor(actor))
        lines.append("end")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def lint_text(text: str | bytes) -> tuple[Simulation | None, list[FileDiagnostic]]:
    """Parse then lint, mapping every finding to a source position.

    Parse errors surface as error-severity findings; when parsing succeeds
    the remaining lint findings (warnings and cross-scenario errors) are
    anchored at their scenario's block line.
    """
    parser = _Parser(_as_text(text))
    parser.run()
    findings = [FileDiagnostic("error", e.span, e.code, e.message) for e in parser.errors]
    sim = None
    if not parser.errors:
        sim = Simulation(scenarios=tuple(parser.scenarios))
        span_by_test_num: dict[int, SourceSpan] = {}
        for scenario, span in zip(parser.scenarios, parser.scenario_spans):
            span_by_test_num.setdefault(scenario.test_num, span)
        for diag in lint_simulation(sim):
            span = SourceSpan(1, 1)
            if diag.test_num is not None:
                span = span_by_test_num.get(diag.test_num, span)
            findings.append(FileDiagnostic(diag.severity, span, diag.code, diag.message))
    findings.sort(key=lambda f: (f.span.line, f.span.column, f.code, f.message))
    return sim, findings
