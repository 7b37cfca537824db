"""Wire protocol: newline-delimited JSON messages, one object per line.

Every message is a JSON object with a ``type`` and ``protocol_version``
field; the full schema and example lines live in PROTOCOL.md. Unknown
fields are ignored on decode (forward compatibility); unknown types and
missing required fields are malformed. The same payloads travel over the
raw TCP stream (agents) and the WebSocket endpoint (browser UI).
"""

from __future__ import annotations

import json
from typing import IO, Any

from .model import ActorKind, Scenario
from .recorder import DecisionRecord, Outcome
from .sim import Observation

PROTOCOL_VERSION = 1

# type -> required payload fields (type and protocol_version are implied)
MESSAGE_SCHEMAS: dict[str, tuple[str, ...]] = {
    "HELLO": ("config",),
    "WELCOME": ("session_id",),
    "SCENARIO_START": ("test_num", "name", "corridor", "spawn", "target", "groups", "actors"),
    "STATE": (
        "tick",
        "position",
        "heading",
        "speed",
        "acceleration",
        "collision_impulse_accum",
        "test_num",
    ),
    "ACTION": ("tick", "control"),
    "COLLISION": ("tick", "display"),
    "EPISODE_END": ("record",),
    "SIM_END": ("records",),
    "ERROR": ("code", "message"),
}

ERROR_CODES = (
    "VERSION_MISMATCH",
    "UNKNOWN_SCENARIO_FILE",
    "BAD_CONFIG",
    "PROTOCOL_VIOLATION",
    "TIMEOUT",
    "MALFORMED_MESSAGE",
    "IO_ERROR",
)


class MalformedMessageError(ValueError):
    def __init__(self, message: str, offset: int = 0):
        self.offset = offset
        super().__init__(f"MALFORMED_MESSAGE at byte {offset}: {message}")


def encode_message(msg: dict[str, Any]) -> bytes:
    """One message -> one JSON line (UTF-8, sorted keys, LF)."""
    return (
        json.dumps(msg, separators=(",", ":"), sort_keys=True, ensure_ascii=False, allow_nan=False)
        + "\n"
    ).encode("utf-8")


def decode_message(line: bytes | str, offset: int = 0) -> dict[str, Any]:
    """Parse and shape-check one line. Raises MalformedMessageError with the
    byte offset of the line for anything that is not a known, complete
    message; extra fields pass through untouched."""
    if isinstance(line, bytes):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedMessageError(f"not UTF-8: {exc}", offset) from None
    else:
        text = line
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedMessageError(f"bad JSON: {exc.msg}", offset + exc.pos) from None
    if not isinstance(msg, dict):
        raise MalformedMessageError("message is not a JSON object", offset)
    mtype = msg.get("type")
    if mtype not in MESSAGE_SCHEMAS:
        raise MalformedMessageError(f"unknown message type {mtype!r}", offset)
    if "protocol_version" not in msg:
        raise MalformedMessageError("missing protocol_version", offset)
    missing = [f for f in MESSAGE_SCHEMAS[mtype] if f not in msg]
    if missing:
        raise MalformedMessageError(f"{mtype} is missing field(s): {', '.join(missing)}", offset)
    return msg


def send_message(stream: IO[bytes], msg: dict[str, Any]) -> None:
    stream.write(encode_message(msg))
    stream.flush()


def recv_message(stream: IO[bytes]) -> dict[str, Any] | None:
    """Read one message line; None on clean EOF."""
    line = stream.readline()
    if not line:
        return None
    return decode_message(line.rstrip(b"\n"))


def _msg(mtype: str, **fields: Any) -> dict[str, Any]:
    msg = {"type": mtype, "protocol_version": PROTOCOL_VERSION}
    msg.update(fields)
    return msg


def hello(config: dict[str, Any]) -> dict[str, Any]:
    return _msg("HELLO", config=config)


def welcome(session_id: str) -> dict[str, Any]:
    return _msg("WELCOME", session_id=session_id)


def actor_payload(scenario: Scenario, actor) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "name": actor.name,
        "kind": actor.kind.value,
        "position": [actor.x, actor.y],
        "radius": actor.radius,
        "side": scenario.side_of(actor).value,
    }
    if actor.kind is ActorKind.PEDESTRIAN:
        attrs = actor.attributes
        payload.update(
            age=attrs.age,
            gender=attrs.gender.value,
            group_id=attrs.group_id,
            group_size=scenario.group_size(attrs.group_id),
            traits=list(attrs.traits),
        )
    else:
        payload["label"] = actor.label
    return payload


def scenario_start(scenario: Scenario) -> dict[str, Any]:
    c = scenario.corridor
    sp = scenario.spawn
    assert scenario.target is not None
    return _msg(
        "SCENARIO_START",
        test_num=scenario.test_num,
        name=scenario.name,
        corridor={"x_min": c.x_min, "x_max": c.x_max, "y_end": c.y_end},
        spawn={"x": sp.x, "y": sp.y, "heading": sp.heading, "speed": sp.speed},
        target=[scenario.target[0], scenario.target[1]],
        groups={str(gid): side.value for gid, side in sorted(scenario.groups.items())},
        actors=[actor_payload(scenario, a) for a in scenario.actors],
    )


def state(observation: Observation) -> dict[str, Any]:
    return _msg(
        "STATE",
        tick=observation.tick,
        position=list(observation.position),
        heading=observation.heading,
        speed=observation.speed,
        acceleration=list(observation.acceleration),
        collision_impulse_accum=observation.collision_impulse_accum,
        test_num=observation.test_num,
    )


def action(tick: int, control: str) -> dict[str, Any]:
    return _msg("ACTION", tick=tick, control=control)


def collision(tick: int, display: str) -> dict[str, Any]:
    return _msg("COLLISION", tick=tick, display=display)


def record_payload(record: DecisionRecord) -> dict[str, Any]:
    return {
        "session_id": record.session_id,
        "test_num": record.test_num,
        "outcome": record.outcome.label(),
        "group_member_names": record.group_member_names,
        "impact_speed": record.impact_speed,
        "tick": record.tick,
        "subject_role": record.subject_role,
        "scenario_name": record.scenario_name,
    }


def record_from_payload(payload: dict[str, Any]) -> DecisionRecord:
    return DecisionRecord(
        session_id=str(payload["session_id"]),
        test_num=int(payload["test_num"]),
        outcome=Outcome.from_label(str(payload["outcome"])),
        group_member_names=str(payload["group_member_names"]),
        impact_speed=float(payload["impact_speed"]),
        tick=int(payload["tick"]),
        subject_role=str(payload["subject_role"]),
        scenario_name=str(payload["scenario_name"]),
    )


def episode_end(record: DecisionRecord) -> dict[str, Any]:
    return _msg("EPISODE_END", record=record_payload(record))


def sim_end(records: list[DecisionRecord]) -> dict[str, Any]:
    return _msg("SIM_END", records=[record_payload(r) for r in records])


def error(code: str, message: str) -> dict[str, Any]:
    return _msg("ERROR", code=code, message=message)
