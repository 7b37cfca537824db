"""Shared fixture builders and seeded generators.

forced_scenario builds dilemmas whose victim rows span the corridor (any
control sequence must hit a group); open_scenario builds a clear corridor
that can only time out. random_simulation generates structurally valid
simulations for round-trip and fuzz-style tests.
"""

from __future__ import annotations

import math
import random
from pathlib import Path

import pytest

from trolleysim.dsl import serialize_simulation
from trolleysim.model import (
    ActorSpec,
    Corridor,
    Gender,
    Mode,
    Scenario,
    Side,
    Simulation,
    Spawn,
    VictimAttributes,
)

TRAIT_POOL = ("pregnant", "disabled", "elderly", "athlete", "doctor")


def ped(name, group, x, y, age=30, gender=Gender.FEMALE, traits=(), radius=0.3):
    attrs = VictimAttributes(age=age, gender=gender, group_id=group, traits=tuple(traits))
    return ActorSpec.pedestrian(name, x, y, attrs, radius=radius)


def basic_scenario(test_num=0, name="two sides", **overrides) -> Scenario:
    fields = dict(
        test_num=test_num,
        name=name,
        spawn=Spawn(0.0, 0.0, 0.0, 5.0),
        corridor=Corridor(-6.0, 6.0, 60.0),
        groups={1: Side.LEFT, 2: Side.RIGHT},
        actors=(
            ped("p1", 1, -2.0, 40.0, age=30, gender=Gender.FEMALE, traits=("pregnant",)),
            ped("p2", 2, 2.0, 40.0, age=8, gender=Gender.MALE),
        ),
        target=(0.0, 50.0),
    )
    fields.update(overrides)
    return Scenario(**fields)


def forced_scenario(test_num=0, name=None, row_y=40.0, speed=5.0, traits_on=()) -> Scenario:
    """Victim rows span the whole corridor: peds every 1 m from wall to wall,
    left of spawn.x -> group 1, right (and center) -> group 2."""
    actors = []
    idx = 0
    for x10 in range(-60, 61, 10):  # x = -6.0 .. 6.0 step 1.0
        x = x10 / 10.0
        group = 1 if x < 0 else 2
        traits = (TRAIT_POOL[idx % len(TRAIT_POOL)],) if idx in traits_on else ()
        actors.append(
            ped(f"p{idx:02d}", group, x, row_y, age=20 + idx, gender=Gender.MALE, traits=traits)
        )
        idx += 1
    return Scenario(
        test_num=test_num,
        name=name or f"forced row {test_num}",
        spawn=Spawn(0.0, 0.0, 0.0, speed),
        corridor=Corridor(-6.0, 6.0, row_y + 20.0),
        groups={1: Side.LEFT, 2: Side.RIGHT},
        actors=tuple(actors),
        target=(0.0, row_y),
    )


def open_scenario(test_num=0, name="open road") -> Scenario:
    """Nothing to hit before the timeout: far wall out of 30 s reach."""
    return Scenario(
        test_num=test_num,
        name=name,
        spawn=Spawn(0.0, 0.0, 0.0, 0.0),
        corridor=Corridor(-6.0, 6.0, 2000.0),
        groups={},
        actors=(),
        target=(0.0, 100.0),
    )


def forced_simulation(count=5, mode=None) -> Simulation:
    scenarios = tuple(
        forced_scenario(i, row_y=30.0 + 3.0 * i, speed=float(2 + i), traits_on=(i, i + 3))
        for i in range(count)
    )
    return Simulation(scenarios=scenarios, mode=mode or Mode.all())


def write_fixture(tmp_path: Path, simulation: Simulation, name: str = "fixture.trly") -> Path:
    path = tmp_path / name
    path.write_text(serialize_simulation(simulation), encoding="utf-8", newline="\n")
    return path


# -- seeded random generation (shared by round-trip tests and acceptance) --


def _identifier(rng: random.Random, prefix: str, used: set[str]) -> str:
    while True:
        name = f"{prefix}{rng.randrange(10_000)}"
        if name not in used:
            used.add(name)
            return name


def random_scenario(rng: random.Random, test_num: int) -> Scenario:
    x_min = rng.uniform(-50.0, 0.0)
    x_max = x_min + rng.uniform(3.0, 40.0)
    y_end = rng.uniform(20.0, 500.0)
    spawn = Spawn(
        x=rng.uniform(x_min, x_max),
        y=rng.uniform(-5.0, min(10.0, y_end)),
        heading=math.radians(rng.uniform(-25.0, 25.0)),
        speed=rng.uniform(0.0, 20.0),
    )
    group_ids = rng.sample(range(10), rng.randint(1, 3))
    groups = {g: rng.choice((Side.LEFT, Side.RIGHT)) for g in group_ids}
    used: set[str] = set()
    actors: list[ActorSpec] = []
    for _ in range(rng.randint(0, 8)):
        kind = rng.choice(("ped", "vehicle", "prop"))
        x = rng.uniform(x_min - 5.0, x_max + 5.0)
        y = rng.uniform(0.0, y_end)
        if kind == "ped":
            traits = tuple(
                sorted(rng.sample(TRAIT_POOL, rng.randint(0, 2)))
            )
            actors.append(
                ActorSpec.pedestrian(
                    _identifier(rng, "p", used),
                    x,
                    y,
                    VictimAttributes(
                        age=rng.randint(0, 99),
                        gender=rng.choice(tuple(Gender)),
                        group_id=rng.choice(group_ids),
                        traits=traits,
                    ),
                    radius=rng.uniform(0.1, 1.0),
                )
            )
        elif kind == "vehicle":
            actors.append(
                ActorSpec.vehicle(
                    _identifier(rng, "v", used), x, y, rng.choice(("sedan", "truck", "bus")),
                    radius=rng.uniform(0.5, 3.0),
                )
            )
        else:
            actors.append(
                ActorSpec.prop(
                    _identifier(rng, "c", used), x, y, rng.choice(("cone", "barrel", "crate")),
                    radius=rng.uniform(0.1, 2.0),
                )
            )
    return Scenario(
        test_num=test_num,
        name=f"generated {test_num} ({rng.randrange(1000)})",
        spawn=spawn,
        corridor=Corridor(x_min, x_max, y_end),
        groups=groups,
        actors=tuple(actors),
        target=(rng.uniform(x_min, x_max), rng.uniform(0.0, y_end)),
    )


def random_simulation(rng: random.Random) -> Simulation:
    test_nums = rng.sample(range(100), rng.randint(1, 5))
    return Simulation(scenarios=tuple(random_scenario(rng, t) for t in sorted(test_nums)))


@pytest.fixture
def forced_sim_file(tmp_path):
    return write_fixture(tmp_path, forced_simulation(5), "five.trly")
