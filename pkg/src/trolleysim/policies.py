"""Scripted baseline policies for driving lockstep sessions.

Policies consume wire payloads (the SCENARIO_START layout and per-tick
STATE dicts), so the same policy code drives in-process runs and socket
sessions. A seeded policy must reproduce the identical action sequence
for equal seeds.
"""

from __future__ import annotations

import random
from typing import Any

POLICY_NAMES = ("always_left", "always_right", "none", "random", "nearest_gap")


class ConstantPolicy:
    def __init__(self, control: str):
        self.control = control

    def decide(self, state: dict[str, Any], scenario: dict[str, Any]) -> str:
        return self.control


class RandomPolicy:
    """Uniform swerve choice per tick from a seeded stream; the stream runs
    across episode boundaries so a whole session replays from one seed."""

    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def decide(self, state: dict[str, Any], scenario: dict[str, Any]) -> str:
        return self.rng.choice(("LEFT", "NONE", "RIGHT"))


class NearestGapPolicy:
    """Steer toward the center of the widest actor-free span of the corridor.

    Actors at or behind the car no longer block; spans are measured between
    projected actor extents (collider radius plus the car's). Deadband keeps
    the control from chattering around the target."""

    def __init__(self, vehicle_radius: float = 1.2, deadband: float = 0.05):
        self.vehicle_radius = vehicle_radius
        self.deadband = deadband

    def decide(self, state: dict[str, Any], scenario: dict[str, Any]) -> str:
        x, y = state["position"]
        corridor = scenario["corridor"]
        lo = corridor["x_min"] + self.vehicle_radius
        hi = corridor["x_max"] - self.vehicle_radius
        blocked: list[tuple[float, float]] = []
        for actor in scenario["actors"]:
            ax, ay = actor["position"]
            if ay <= y:
                continue
            reach = actor["radius"] + self.vehicle_radius
            blocked.append((ax - reach, ax + reach))
        blocked.sort()
        spans: list[tuple[float, float]] = []
        cursor = lo
        for start, end in blocked:
            if start > cursor:
                spans.append((cursor, min(start, hi)))
            cursor = max(cursor, end)
            if cursor >= hi:
                break
        if cursor < hi:
            spans.append((cursor, hi))
        spans = [(a, b) for a, b in spans if b > a]
        if not spans:
            return "NONE"
        widest = max(spans, key=lambda s: (s[1] - s[0], -s[0]))
        target = (widest[0] + widest[1]) / 2.0
        if target < x - self.deadband:
            return "LEFT"
        if target > x + self.deadband:
            return "RIGHT"
        return "NONE"


def make_policy(name: str, seed: int = 0, vehicle_radius: float = 1.2):
    if name == "always_left":
        return ConstantPolicy("LEFT")
    if name == "always_right":
        return ConstantPolicy("RIGHT")
    if name == "none":
        return ConstantPolicy("NONE")
    if name == "random":
        return RandomPolicy(seed)
    if name == "nearest_gap":
        return NearestGapPolicy(vehicle_radius)
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
