"""Agent-side session drivers.

Two ways to run a scripted policy to SIM_END:

* in-process, with no sockets: the deterministic path the acceptance
  suite leans on;
* over a real TCP connection, speaking the lockstep wire protocol.

Both feed policies the same wire payloads, so a policy cannot tell the
difference.
"""

from __future__ import annotations

import socket
from dataclasses import dataclass
from typing import Any

from . import protocol
from .model import Simulation
from .recorder import ActionTrace, DecisionRecord, RecordSink
from .sim import Control, EpisodePhase, SimParams, SimulationRun


class AgentError(RuntimeError):
    """Session failed: connection trouble or a server-side ERROR message."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


def run_in_process(
    simulation: Simulation,
    params: SimParams,
    policy,
    *,
    session_id: str,
    subject_role: str = "agent",
    sink: RecordSink | None = None,
) -> SimulationRun:
    """Drive every episode to completion with the policy; returns the
    finished run (records and action traces included)."""
    run = SimulationRun(
        simulation, params, session_id=session_id, subject_role=subject_role, sink=sink
    )
    layouts: dict[int, dict[str, Any]] = {}
    while not run.finished:
        episode = run.episode
        test_num = episode.scenario.test_num
        layout = layouts.get(test_num)
        if layout is None:
            layout = layouts[test_num] = protocol.scenario_start(episode.scenario)
        state = protocol.state(episode.observation())
        control = Control[policy.decide(state, layout)]
        run.step(control)
        if episode.phase is EpisodePhase.COLLIDED:
            run.advance()
    return run


@dataclass
class SocketSessionResult:
    session_id: str
    records: list[DecisionRecord]
    traces: list[ActionTrace]
    collisions: list[str]  # display messages, in order


def run_socket_session(
    host: str,
    port: int,
    policy,
    *,
    mode: str = "all",
    test_num: int | None = None,
    seed: int | None = None,
    scenario_file: str | None = None,
    timeout: float = 60.0,
) -> SocketSessionResult:
    """Connect, handshake as a lockstep agent, and play to SIM_END."""
    config: dict[str, Any] = {"role": "agent", "pacing": "lockstep", "mode": mode}
    if test_num is not None:
        config["test_num"] = test_num
    if seed is not None:
        config["seed"] = seed
    if scenario_file is not None:
        config["scenario_file"] = scenario_file

    with socket.create_connection((host, port), timeout=timeout) as sock:
        rfile = sock.makefile("rb")
        wfile = sock.makefile("wb")
        protocol.send_message(wfile, protocol.hello(config))

        session_id = ""
        records: list[DecisionRecord] = []
        traces: list[ActionTrace] = []
        collisions: list[str] = []
        layout: dict[str, Any] | None = None
        controls: list[str] = []
        current_test = -1

        while True:
            msg = protocol.recv_message(rfile)
            if msg is None:
                raise AgentError("IO_ERROR", "server closed the connection before SIM_END")
            mtype = msg["type"]
            if mtype == "ERROR":
                raise AgentError(msg["code"], msg["message"])
            if mtype == "WELCOME":
                session_id = msg["session_id"]
            elif mtype == "SCENARIO_START":
                layout = msg
                controls = []
                current_test = msg["test_num"]
            elif mtype == "STATE":
                assert layout is not None, "STATE before SCENARIO_START"
                control = policy.decide(msg, layout)
                controls.append(control)
                protocol.send_message(wfile, protocol.action(msg["tick"], control))
            elif mtype == "COLLISION":
                collisions.append(msg["display"])
            elif mtype == "EPISODE_END":
                records.append(protocol.record_from_payload(msg["record"]))
                traces.append(ActionTrace.from_controls(session_id, current_test, controls))
            elif mtype == "SIM_END":
                end_records = [protocol.record_from_payload(p) for p in msg["records"]]
                return SocketSessionResult(session_id, end_records, traces, collisions)
