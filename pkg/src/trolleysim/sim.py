"""Deterministic fixed-timestep episode core.

The subject car accelerates automatically; the only control is swerving
left or right, with heading clamped to a window around the spawn heading.
Invisible corridor barriers reset the car's facing instead of ending the
episode, so every episode terminates by hitting a victim group or by
timing out. State advances tick by tick with no wall-clock coupling:
identical control sequences replay identically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum, IntEnum

import numpy as np

from . import kernels
from .model import (
    ActorKind,
    Scenario,
    Simulation,
    WrongPhaseError,
    group_member_names,
    validate_scenario,
)
from .recorder import ActionTrace, DecisionRecord, Outcome, RecordSink, make_decision_record


class Control(IntEnum):
    """Swerve input; the value is the steering sign used by the kinematics."""

    LEFT = -1
    NONE = 0
    RIGHT = 1


@dataclass(frozen=True)
class SimParams:
    """Tunable magnitudes of the episode dynamics. The defaults are design
    choices, not measured constants; every field is config-overridable."""

    dt: float = 1.0 / 60.0
    a_auto: float = 3.0
    v_max: float = 30.0
    omega_max: float = 1.2
    theta_max: float = 0.5
    vehicle_radius: float = 1.2
    t_max_ticks: int = 1800

    def __post_init__(self) -> None:
        for name in ("dt", "v_max", "omega_max", "theta_max", "vehicle_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        # a_auto may be zero: a coasting car is a legitimate test configuration
        if self.a_auto < 0:
            raise ValueError("a_auto must be non-negative")
        if self.t_max_ticks <= 0:
            raise ValueError("t_max_ticks must be strictly positive")
        if self.dt > 0.1:
            raise ValueError("dt above 0.1 s breaks the fixed-timestep contract")


@dataclass(frozen=True)
class VehicleState:
    """Subject car snapshot. heading0 is the spawn heading the barriers
    reset to (and the center of the steering clamp window)."""

    x: float
    y: float
    heading: float
    speed: float
    accel: tuple[float, float] = (0.0, 0.0)
    collision_impulse_accum: float = 0.0
    heading0: float = 0.0


class EpisodePhase(Enum):
    INIT = "init"
    RUNNING = "running"
    COLLIDED = "collided"
    DONE = "done"


class TickEventKind(Enum):
    STATE_UPDATED = "state_updated"
    HIT = "hit"
    BARRIER_HIT = "barrier_hit"
    DISPLAY = "display"
    SCENARIO_ADVANCED = "scenario_advanced"
    SIMULATION_ENDED = "simulation_ended"


@dataclass(frozen=True)
class TickEvent:
    tick: int
    kind: TickEventKind
    actor_name: str = ""
    message: str = ""
    test_num: int | None = None


class HitKind(Enum):
    ACTOR = "actor"
    BARRIER_LEFT = "barrier_left"
    BARRIER_RIGHT = "barrier_right"
    FAR_WALL = "far_wall"


@dataclass(frozen=True)
class Hit:
    kind: HitKind
    actor_name: str = ""


@dataclass(frozen=True)
class Observation:
    """Per-tick snapshot streamed to clients; the static actor layout is
    sent once per scenario and referenced here by test_num."""

    tick: int
    position: tuple[float, float]
    heading: float
    speed: float
    acceleration: tuple[float, float]
    collision_impulse_accum: float
    test_num: int


class InvalidScenarioError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = diagnostics
        super().__init__(f"INVALID_SCENARIO: {[d.code for d in diagnostics]}")


def step_vehicle(state: VehicleState, control: Control, params: SimParams) -> VehicleState:
    """Pure single-tick kinematics update; see kernels.tick_update for the
    exact operation order."""
    x, y, heading, speed, ax, ay = kernels.tick_update(
        state.x,
        state.y,
        state.heading,
        state.speed,
        float(control.value),
        state.heading0,
        params.dt,
        params.a_auto,
        params.v_max,
        params.omega_max,
        params.theta_max,
    )
    return replace(
        state, x=x, y=y, heading=heading, speed=speed, accel=(ax, ay)
    )


class _Layout:
    """Scenario actors flattened into scan arrays, sorted by name so the
    collision tie-break (nearest, then name ascending) is array order."""

    def __init__(self, scenario: Scenario):
        actors = sorted(scenario.actors, key=lambda a: a.name)
        self.names = [a.name for a in actors]
        self.x = np.array([a.x for a in actors], dtype=np.float64)
        self.y = np.array([a.y for a in actors], dtype=np.float64)
        self.r = np.array([a.radius for a in actors], dtype=np.float64)
        self.is_victim = np.array(
            [a.kind is ActorKind.PEDESTRIAN for a in actors], dtype=np.bool_
        )
        self.group_ids = [
            a.attributes.group_id if a.attributes is not None else -1 for a in actors
        ]


def _check_layout(state: VehicleState, layout: _Layout, scenario: Scenario, params: SimParams) -> Hit | None:
    r = params.vehicle_radius
    idx = kernels.nearest_contact(layout.x, layout.y, layout.r, state.x, state.y, r)
    if idx >= 0:
        return Hit(HitKind.ACTOR, layout.names[idx])
    c = scenario.corridor
    if state.x - r < c.x_min:
        return Hit(HitKind.BARRIER_LEFT)
    if state.x + r > c.x_max:
        return Hit(HitKind.BARRIER_RIGHT)
    if state.y + r >= c.y_end:
        return Hit(HitKind.FAR_WALL)
    return None


def check_collisions(state: VehicleState, scenario: Scenario, params: SimParams) -> Hit | None:
    """Contact query for the current vehicle position. An actor contact wins
    over a barrier contact on the same tick; among actors the nearest center
    wins, ties broken by name ascending. Contact is inclusive (<=)."""
    return _check_layout(state, _Layout(scenario), scenario, params)


class EpisodeState:
    """One running scenario: single-owner mutable state advanced by exactly
    one driver; emitted events and observations are immutable values."""

    def __init__(self, scenario: Scenario, params: SimParams):
        diagnostics = [d for d in validate_scenario(scenario) if d.severity == "error"]
        if diagnostics:
            raise InvalidScenarioError(diagnostics)
        self.scenario = scenario
        self.params = params
        self.layout = _Layout(scenario)
        sp = scenario.spawn
        self.vehicle = VehicleState(
            x=sp.x, y=sp.y, heading=sp.heading, speed=sp.speed, heading0=sp.heading
        )
        self.tick = 0
        self.phase = EpisodePhase.RUNNING
        self.outcome: Outcome | None = None

    def _require_running(self) -> None:
        if self.phase is not EpisodePhase.RUNNING:
            raise WrongPhaseError(f"episode phase is {self.phase.value}, not running")

    def handle_hit(self, hit: Hit) -> list[TickEvent]:
        """Apply a contact: a victim-group pedestrian ends the episode, any
        other contact resets facing to the spawn heading and clamps the car
        back inside the corridor by the penetration depth. Either way the
        impact speed joins the collision impulse accumulator."""
        self._require_running()
        v = self.vehicle
        impact = v.speed
        actor = self.scenario.actor_by_name(hit.actor_name) if hit.kind is HitKind.ACTOR else None
        if actor is not None and actor.kind is ActorKind.PEDESTRIAN:
            assert actor.attributes is not None
            gid = actor.attributes.group_id
            self.phase = EpisodePhase.COLLIDED
            self.outcome = Outcome.group(gid)
            self.vehicle = replace(
                v, collision_impulse_accum=v.collision_impulse_accum + impact
            )
            message = f"Collided with {group_member_names(self.scenario, gid)}"
            return [
                TickEvent(self.tick, TickEventKind.HIT, actor_name=actor.name),
                TickEvent(self.tick, TickEventKind.DISPLAY, message=message),
            ]
        c = self.scenario.corridor
        r = self.params.vehicle_radius
        x = min(max(v.x, c.x_min + r), c.x_max - r)
        y = min(v.y, c.y_end - r)
        self.vehicle = replace(
            v,
            x=x,
            y=y,
            heading=v.heading0,
            collision_impulse_accum=v.collision_impulse_accum + impact,
        )
        return [TickEvent(self.tick, TickEventKind.BARRIER_HIT, actor_name=hit.actor_name)]

    def run_tick(self, control: Control) -> list[TickEvent]:
        """Advance exactly one tick: step, detect contact, handle it, then
        time out if the tick budget is spent without a victim collision."""
        self._require_running()
        self.vehicle = step_vehicle(self.vehicle, control, self.params)
        self.tick += 1
        events = [TickEvent(self.tick, TickEventKind.STATE_UPDATED)]
        hit = _check_layout(self.vehicle, self.layout, self.scenario, self.params)
        if hit is not None:
            events.extend(self.handle_hit(hit))
        if self.phase is EpisodePhase.RUNNING and self.tick >= self.params.t_max_ticks:
            self.phase = EpisodePhase.COLLIDED
            self.outcome = Outcome.timeout()
        return events

    def observation(self) -> Observation:
        v = self.vehicle
        return Observation(
            tick=self.tick,
            position=(v.x, v.y),
            heading=v.heading,
            speed=v.speed,
            acceleration=v.accel,
            collision_impulse_accum=v.collision_impulse_accum,
            test_num=self.scenario.test_num,
        )


def init_values(scenario: Scenario, params: SimParams) -> EpisodeState:
    """Start an episode: car at the spawn pose, zero accumulated impulse,
    tick 0, phase running, colliders armed."""
    return EpisodeState(scenario, params)


def make_observation(episode: EpisodeState) -> Observation:
    return episode.observation()


class SimulationRun:
    """Drives a Simulation's scenarios in order (or the single selected one),
    collecting one DecisionRecord and one ActionTrace per episode."""

    def __init__(
        self,
        simulation: Simulation,
        params: SimParams,
        *,
        session_id: str,
        subject_role: str = "agent",
        sink: RecordSink | None = None,
    ):
        if simulation.mode.kind == "single":
            test_num = simulation.mode.test_num
            scenario = None if test_num is None else simulation.scenario_by_test_num(test_num)
            if scenario is None:
                raise ValueError(f"mode single({test_num}): no such test_num")
            queue = [scenario]
        else:
            if not simulation.scenarios:
                raise ValueError("simulation has no scenarios")
            queue = list(simulation.scenarios)
        self.simulation = simulation
        self.params = params
        self.session_id = session_id
        self.subject_role = subject_role
        self.sink = sink
        self.records: list[DecisionRecord] = []
        self.traces: list[ActionTrace] = []
        self._queue = queue
        self._index = 0
        self._controls: list[Control] = []
        self.finished = False
        self.episode = init_values(queue[0], params)

    def step(self, control: Control) -> list[TickEvent]:
        events = self.episode.run_tick(control)
        self._controls.append(control)
        return events

    def advance(self) -> list[TickEvent]:
        """Close out a collided episode: record the decision, then spawn the
        next scenario or end the simulation and flush the sink."""
        episode = self.episode
        if episode.phase is not EpisodePhase.COLLIDED:
            raise WrongPhaseError(f"episode phase is {episode.phase.value}, not collided")
        record = make_decision_record(
            episode, session_id=self.session_id, subject_role=self.subject_role
        )
        self.records.append(record)
        if self.sink is not None:
            self.sink.write(record)
        self.traces.append(
            ActionTrace.from_controls(
                self.session_id, episode.scenario.test_num, [c.name for c in self._controls]
            )
        )
        self._controls = []
        episode.phase = EpisodePhase.DONE
        self._index += 1
        if self._index >= len(self._queue):
            self.finished = True
            if self.sink is not None:
                self.sink.flush()
            return [TickEvent(episode.tick, TickEventKind.SIMULATION_ENDED)]
        self.episode = init_values(self._queue[self._index], self.params)
        return [
            TickEvent(
                0, TickEventKind.SCENARIO_ADVANCED, test_num=self.episode.scenario.test_num
            )
        ]


def advance_simulation(run: SimulationRun) -> list[TickEvent]:
    return run.advance()
