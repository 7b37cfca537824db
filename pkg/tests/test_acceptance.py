"""Acceptance suite: one test per exit criterion, each printing a PASS line
with its measured numbers. Tolerances are pinned here, not calibrated
elsewhere: byte equality and exact float equality wherever the contract
says exact.

Run with `pytest tests/test_acceptance.py -v -s` to see the summary lines.
"""

from __future__ import annotations

import io
import json
import math
import random
import time
from pathlib import Path

import pytest

from trolleysim import protocol
from trolleysim.agent import run_socket_session
from trolleysim.cli import main as cli_main
from trolleysim.dsl import SimulationParseError, parse_simulation, serialize_simulation
from trolleysim.policies import make_policy
from trolleysim.recorder import (
    DecisionRecord,
    Outcome,
    RecordSink,
    aggregate_stats,
    read_records,
    write_records,
)
from trolleysim.server import TrolleyServer
from trolleysim.sim import (
    Control,
    EpisodePhase,
    Hit,
    HitKind,
    SimParams,
    VehicleState,
    check_collisions,
    init_values,
    step_vehicle,
)

from conftest import (
    basic_scenario,
    forced_scenario,
    forced_simulation,
    open_scenario,
    ped,
    random_simulation,
    write_fixture,
)

GOLDEN = Path(__file__).resolve().parent / "golden" / "records.tsv"


def report(criterion: str, detail: str) -> None:
    print(f"[{criterion}] PASS ({detail})")


def test_determinism_replay_byte_for_byte(tmp_path):
    """100 randomized seeded agent runs over a 5-scenario fixture; replay
    reproduces each decision log byte-for-byte; under 10 s total."""
    fixture = write_fixture(tmp_path, forced_simulation(5), "five.trly")
    start = time.perf_counter()
    for seed in range(100):
        log = tmp_path / f"log{seed}.tsv"
        trace = tmp_path / f"trace{seed}.ndjson"
        replayed = tmp_path / f"replayed{seed}.tsv"
        assert (
            cli_main(
                [
                    "agent",
                    str(fixture),
                    "--policy",
                    "random",
                    "--seed",
                    str(seed),
                    "--out",
                    str(log),
                    "--trace-out",
                    str(trace),
                ]
            )
            == 0
        )
        assert cli_main(["replay", str(fixture), str(trace), "--out", str(replayed)]) == 0
        assert replayed.read_bytes() == log.read_bytes(), f"seed {seed} diverged"
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"took {elapsed:.2f} s, budget is 10 s"
    report("determinism-replay", f"100 runs replayed byte-identically in {elapsed:.2f} s")


def test_forced_choice_invisible_barriers():
    """1000 random control sequences on span-the-corridor fixtures all end in
    Collided(group) before t_max_ticks; the `none` policy on an open fixture
    ends in Collided(timeout) at exactly t_max_ticks."""
    params = SimParams()
    rng = random.Random(2024)
    scenarios = [forced_scenario(i, row_y=30.0 + 2.0 * (i % 5)) for i in range(4)]
    for trial in range(1000):
        episode = init_values(scenarios[trial % len(scenarios)], params)
        while episode.phase is EpisodePhase.RUNNING:
            episode.run_tick(Control(rng.choice((-1, 0, 1))))
        assert episode.outcome.kind == "group", f"trial {trial} ended {episode.outcome}"
        assert episode.tick < params.t_max_ticks, f"trial {trial} too slow: {episode.tick}"

    episode = init_values(open_scenario(), params)
    policy_none = make_policy("none")
    while episode.phase is EpisodePhase.RUNNING:
        episode.run_tick(Control[policy_none.decide({}, {})])
    assert episode.outcome.kind == "timeout"
    assert episode.tick == params.t_max_ticks
    report(
        "forced-choice",
        f"1000/1000 random-control episodes hit a group; timeout at tick {episode.tick}",
    )


def test_kinematics_oracle_exact():
    """1000 iterated steps under constant control equal an independently
    hand-coded application of the update equations. Zero tolerance."""

    def oracle(x, y, h, s, u, h0, p):
        s1 = min(s + p.a_auto * p.dt, p.v_max)
        h1 = max(h0 - p.theta_max, min(h0 + p.theta_max, h + u * p.omega_max * p.dt))
        x1 = x + s1 * p.dt * math.sin(h1)
        y1 = y + s1 * p.dt * math.cos(h1)
        ax = (s1 * math.sin(h1) - s * math.sin(h)) / p.dt
        ay = (s1 * math.cos(h1) - s * math.cos(h)) / p.dt
        return x1, y1, h1, s1, ax, ay

    params = SimParams()
    checked = 0
    for control in (Control.LEFT, Control.NONE, Control.RIGHT):
        state = VehicleState(x=0.25, y=-3.0, heading=0.0, speed=2.0, heading0=0.0)
        x, y, h, s = state.x, state.y, state.heading, state.speed
        for _ in range(1000):
            state = step_vehicle(state, control, params)
            x, y, h, s, ax, ay = oracle(x, y, h, s, control.value, 0.0, params)
            assert (state.x, state.y, state.heading, state.speed) == (x, y, h, s)
            assert state.accel == (ax, ay)
            checked += 1
    report("kinematics-oracle", f"{checked} steps bit-exact across 3 constant controls")


def test_collision_oracle_brute_force():
    """check_collisions agrees with an all-pairs distance scan on 10^4 random
    layouts, including inclusive boundaries and name-order tie-breaks."""

    def oracle(state, scenario, params):
        best = None
        for a in scenario.actors:
            dx = a.x - state.x
            dy = a.y - state.y
            d2 = dx * dx + dy * dy
            reach = params.vehicle_radius + a.radius
            if d2 <= reach * reach:
                key = (d2, a.name)
                if best is None or key < best:
                    best = key
        if best is not None:
            return Hit(HitKind.ACTOR, best[1])
        c = scenario.corridor
        r = params.vehicle_radius
        if state.x - r < c.x_min:
            return Hit(HitKind.BARRIER_LEFT)
        if state.x + r > c.x_max:
            return Hit(HitKind.BARRIER_RIGHT)
        if state.y + r >= c.y_end:
            return Hit(HitKind.FAR_WALL)
        return None

    rng = random.Random(99)
    params = SimParams()
    agreements = 0
    for trial in range(10_000):
        actors = []
        n = rng.randrange(0, 7)
        for i in range(n):
            actors.append(
                ped(
                    f"a{rng.randrange(50):02d}n{i}",
                    1,
                    rng.uniform(-8.0, 8.0),
                    rng.uniform(-3.0, 10.0),
                    radius=rng.choice((0.3, 0.5, 1.0)),
                )
            )
        if trial % 10 == 0 and actors:
            # exact-boundary contact: place the vehicle reach-distance away
            a = actors[0]
            state = VehicleState(a.x - (params.vehicle_radius + a.radius), a.y, 0.0, 1.0)
        elif trial % 10 == 5 and len(actors) >= 2:
            # equidistant tie: mirror the first actor's offset onto the second
            b, c = actors[0], actors[1]
            actors[1] = ped(c.name, 1, 2.0 - b.x, b.y, radius=b.radius)
            state = VehicleState(1.0, b.y, 0.0, 1.0)
        else:
            state = VehicleState(rng.uniform(-8.0, 8.0), rng.uniform(-3.0, 10.0), 0.0, 1.0)
        scenario = basic_scenario(actors=tuple(actors))
        assert check_collisions(state, scenario, params) == oracle(state, scenario, params)
        agreements += 1
    report("collision-oracle", f"{agreements} layouts agreed exactly with brute force")


def test_parser_round_trip_and_fuzz():
    """500 generated valid simulations survive parse(serialize(x)) == x;
    100k random byte strings produce structured errors only, never crashes."""
    for seed in range(500):
        sim = random_simulation(random.Random(seed))
        assert parse_simulation(serialize_simulation(sim)) == sim, f"seed {seed}"

    rng = random.Random(12345)
    crashes = 0
    errors = 0
    for _ in range(100_000):
        blob = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 80)))
        try:
            parse_simulation(blob)
        except SimulationParseError:
            errors += 1
        except Exception:  # pragma: no cover - the criterion is that this never happens
            crashes += 1
    assert crashes == 0
    report("parser", f"500 round-trips exact; 100000 fuzz inputs, {errors} structured errors, 0 crashes")


def test_protocol_conformance_over_socket(tmp_path):
    """A lockstep agent over a real TCP socket completes a 10-scenario file;
    SIM_END carries exactly 10 records matching the recorder sink
    line-for-line; encode/decode identity holds for all message types."""
    fixture = write_fixture(tmp_path, forced_simulation(10), "ten.trly")
    log = tmp_path / "log.tsv"
    sink = RecordSink(log)
    with TrolleyServer(fixture, sink=sink, default_pacing="lockstep") as server:
        host, port = server.address
        result = run_socket_session(host, port, make_policy("random", seed=5), seed=5)
    sink.close()
    assert len(result.records) == 10
    sink_lines = log.read_text(encoding="utf-8").splitlines()
    assert [r.to_line() for r in result.records] == sink_lines

    from test_protocol import sample_messages

    for msg in sample_messages():
        normalized = json.loads(protocol.encode_message(msg))
        assert protocol.decode_message(protocol.encode_message(normalized)) == normalized
    report(
        "protocol-conformance",
        f"10 records over the wire match the sink; {len(sample_messages())} message types round-trip",
    )


def test_recorder_round_trip_and_golden():
    """read(write(records)) == records on generated lists; the documented
    line grammar matches the golden log byte-for-byte."""
    rng = random.Random(7)
    checked = 0
    for _ in range(200):
        records = []
        for _ in range(rng.randrange(0, 12)):
            if rng.random() < 0.3:
                outcome, names = Outcome.timeout(), ""
            else:
                outcome, names = Outcome.group(rng.randrange(5)), "a:1:male:"
            records.append(
                DecisionRecord(
                    session_id=f"s{rng.randrange(1000)}",
                    test_num=rng.randrange(50),
                    outcome=outcome,
                    group_member_names=names,
                    impact_speed=round(rng.uniform(0, 40), 6),
                    tick=rng.randrange(1801),
                    subject_role=rng.choice(("human", "agent")),
                    scenario_name=f"scenario {rng.randrange(50)}",
                )
            )
        buf = io.StringIO()
        write_records(records, buf)
        back, errors = read_records(io.StringIO(buf.getvalue()))
        assert errors == [] and back == records
        checked += len(records)

    golden_records = [
        DecisionRecord(
            "sess-1", 0, Outcome.group(1), "p1:30:female:pregnant", 12.5, 240, "human", "two vs one"
        ),
        DecisionRecord("sess-1", 1, Outcome.timeout(), "", 30.0, 1800, "human", "open road"),
        DecisionRecord(
            "sess-2",
            0,
            Outcome.group(2),
            "a:8:male:|b:40:male:disabled,elderly",
            10.05,
            300,
            "agent",
            "two vs one",
        ),
    ]
    buf = io.StringIO()
    write_records(golden_records, buf)
    assert buf.getvalue().encode("utf-8") == GOLDEN.read_bytes()
    back, errors = read_records(str(GOLDEN))
    assert errors == [] and back == golden_records
    report("recorder", f"{checked} records round-tripped; golden file grammar matches byte-for-byte")


def test_stats_hand_counted():
    """aggregate_stats on a hand-built 6-record set: 4 of 6 hit the smaller
    group => spared_larger_group_rate = 2/3; counts match a hand tally."""
    scenario = basic_scenario(
        actors=(
            ped("a", 1, -2.0, 40.0, traits=("pregnant",)),
            ped("b", 1, -3.0, 40.0),
            ped("c", 2, 2.0, 40.0, traits=("disabled",)),
        ),
    )  # group 1 size 2, group 2 size 1: hitting group 2 spares the larger group
    records = [
        DecisionRecord("s", 0, Outcome.group(2), "c:30:female:disabled", 10.0, 100, "human", "x"),
        DecisionRecord("s", 0, Outcome.group(2), "c:30:female:disabled", 11.0, 110, "human", "x"),
        DecisionRecord("s", 0, Outcome.group(2), "c:30:female:disabled", 12.0, 120, "human", "x"),
        DecisionRecord("s", 0, Outcome.group(2), "c:30:female:disabled", 13.0, 130, "human", "x"),
        DecisionRecord("s", 0, Outcome.group(1), "a:...|b:...", 14.0, 140, "human", "x"),
        DecisionRecord("s", 0, Outcome.group(1), "a:...|b:...", 15.0, 150, "human", "x"),
    ]
    stats = aggregate_stats(records, [scenario])
    assert stats.total == 6
    assert stats.by_outcome == {"group:2": 4, "group:1": 2}
    assert stats.spared_larger_group_rate == pytest.approx(4 / 6)
    assert stats.spared_larger_group_rate == pytest.approx(2 / 3)
    # traits: every group-2 hit counts c's "disabled"; group-1 hits count a's "pregnant"
    assert stats.by_trait == {"disabled": 4, "pregnant": 2}
    report("stats", "6-record hand count matches: rate 2/3, outcome and trait tallies exact")
