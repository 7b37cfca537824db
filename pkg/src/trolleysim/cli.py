"""Operator entry points.

Subcommands: serve (run the session server), validate (lint a scenario
file), agent (run a scripted policy in-process or against a server),
replay (re-run recorded action traces; output is byte-identical to the
original log), stats (summarize a decision log).

SimParams fields can be overridden via environment variables
(TROLLEYSIM_DT, TROLLEYSIM_A_AUTO, TROLLEYSIM_V_MAX, TROLLEYSIM_OMEGA_MAX,
TROLLEYSIM_THETA_MAX, TROLLEYSIM_VEHICLE_RADIUS, TROLLEYSIM_T_MAX_TICKS);
TROLLEYSIM_NUMBA selects the kernel backend. Exit codes: 0 success,
1 validation/domain errors, 2 I/O failures.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import socket
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import agent as agent_mod
from . import dsl, recorder
from .model import Mode, Simulation
from .policies import POLICY_NAMES, make_policy
from .recorder import RecordSink, TraceBundle, load_traces, read_records, save_traces
from .server import TrolleyServer
from .sim import Control, EpisodePhase, SimParams, SimulationRun

_ENV_PARAMS = {
    "TROLLEYSIM_DT": ("dt", float),
    "TROLLEYSIM_A_AUTO": ("a_auto", float),
    "TROLLEYSIM_V_MAX": ("v_max", float),
    "TROLLEYSIM_OMEGA_MAX": ("omega_max", float),
    "TROLLEYSIM_THETA_MAX": ("theta_max", float),
    "TROLLEYSIM_VEHICLE_RADIUS": ("vehicle_radius", float),
    "TROLLEYSIM_T_MAX_TICKS": ("t_max_ticks", int),
}


class TraceMismatchError(RuntimeError):
    pass


def params_from_env(environ=None) -> SimParams:
    environ = os.environ if environ is None else environ
    overrides = {}
    for var, (field, conv) in _ENV_PARAMS.items():
        raw = environ.get(var)
        if raw is not None and raw != "":
            overrides[field] = conv(raw)
    return SimParams(**overrides)


def _parse_mode(text: str) -> Mode:
    if text == "all":
        return Mode.all()
    kind, sep, num = text.partition(":")
    if kind == "single" and sep and num.lstrip("-").isdigit():
        return Mode.single(int(num))
    raise argparse.ArgumentTypeError(f"mode must be 'all' or 'single:<test_num>', got {text!r}")


def _parse_addr(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"address must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def _open_sink(target: str) -> RecordSink:
    """File path, or tcp://host:port for the network-socket sink."""
    if target.startswith("tcp://"):
        host, port = _parse_addr(target[len("tcp://") :])
        sock = socket.create_connection((host, port))
        return RecordSink(sock.makefile("w", encoding="utf-8", newline="\n"))
    return RecordSink(target)


def cmd_validate(args) -> int:
    try:
        data = Path(args.file).read_bytes()
    except OSError as exc:
        print(f"error: cannot read {args.file}: {exc}", file=sys.stderr)
        return 2
    _sim, findings = dsl.lint_text(data)
    for f in findings:
        print(f"{f.severity}:{f.span.line}:{f.span.column}:{f.code}:{f.message}")
    return 1 if any(f.severity == "error" for f in findings) else 0


def _load_simulation(path: str, mode: Mode) -> tuple[Simulation, bytes]:
    data = Path(path).read_bytes()
    sim = dsl.parse_simulation(data)
    return Simulation(scenarios=sim.scenarios, mode=mode), data


def cmd_agent(args) -> int:
    params = params_from_env()
    policy = make_policy(args.policy, seed=args.seed, vehicle_radius=params.vehicle_radius)
    if os.path.exists(args.target):
        return _agent_in_process(args, params, policy)
    if ":" in args.target:
        return _agent_socket(args, policy)
    print(f"error: target {args.target!r} is neither a file nor host:port", file=sys.stderr)
    return 2


def _agent_in_process(args, params: SimParams, policy) -> int:
    try:
        simulation, data = _load_simulation(args.target, args.mode)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except dsl.SimulationParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sha = hashlib.sha256(data).hexdigest()
    session_id = f"{args.policy}-s{args.seed}-{sha[:12]}"
    sink = _open_sink(args.out) if args.out else None
    try:
        run = agent_mod.run_in_process(
            simulation, params, policy, session_id=session_id, sink=sink
        )
    finally:
        if sink is not None:
            sink.close()
    for record in run.records:
        print(record.to_line())
    if args.trace_out:
        bundle = TraceBundle(
            session_id=session_id,
            file_sha256=sha,
            mode={"kind": simulation.mode.kind, "test_num": simulation.mode.test_num},
            params=asdict(params),
            subject_role="agent",
            traces=tuple(run.traces),
        )
        save_traces(args.trace_out, bundle)
    return 0


def _agent_socket(args, policy) -> int:
    host, port = _parse_addr(args.target)
    if args.trace_out:
        print("warning: --trace-out is only supported for file targets", file=sys.stderr)
    try:
        result = agent_mod.run_socket_session(
            host,
            port,
            policy,
            mode=args.mode.kind,
            test_num=args.mode.test_num,
            seed=args.seed,
        )
    except (OSError, agent_mod.AgentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for record in result.records:
        print(record.to_line())
    if args.out:
        recorder.write_records(result.records, args.out)
    return 0


def cmd_replay(args) -> int:
    try:
        bundle = load_traces(args.trace)
        data = Path(args.file).read_bytes()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: bad trace file: {exc}", file=sys.stderr)
        return 1
    try:
        records = replay_bundle(data, bundle)
    except TraceMismatchError as exc:
        print(f"error: TRACE_MISMATCH: {exc}", file=sys.stderr)
        return 1
    except dsl.SimulationParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    lines = [r.to_line() for r in records]
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(line + "\n" for line in lines)
    for line in lines:
        print(line)
    return 0


def replay_bundle(file_data: bytes, bundle: TraceBundle) -> list[recorder.DecisionRecord]:
    """Re-run the episodes of a trace bundle against the scenario file.

    Raises TraceMismatchError whenever the trace cannot have come from this
    file/params combination: hash mismatch, wrong episode count, an episode
    colliding before its controls run out, or not colliding at their end.
    """
    sha = hashlib.sha256(file_data).hexdigest()
    if sha != bundle.file_sha256:
        raise TraceMismatchError(
            f"scenario file hash {sha[:12]}... does not match trace {bundle.file_sha256[:12]}..."
        )
    mode = Mode(kind=bundle.mode["kind"], test_num=bundle.mode.get("test_num"))
    simulation = Simulation(scenarios=dsl.parse_simulation(file_data).scenarios, mode=mode)
    params = SimParams(**bundle.params)
    run = SimulationRun(
        simulation,
        params,
        session_id=bundle.session_id,
        subject_role=bundle.subject_role,
    )
    traces = list(bundle.traces)
    index = 0
    while not run.finished:
        if index >= len(traces):
            raise TraceMismatchError(f"trace has {len(traces)} episode(s); simulation has more")
        trace = traces[index]
        episode = run.episode
        if trace.test_num != episode.scenario.test_num:
            raise TraceMismatchError(
                f"episode {index} is test_num {episode.scenario.test_num}, "
                f"trace says {trace.test_num}"
            )
        for offset, name in enumerate(trace.expand()):
            if episode.phase is not EpisodePhase.RUNNING:
                raise TraceMismatchError(
                    f"episode {index} ended at tick {episode.tick} with controls left over"
                )
            try:
                run.step(Control[name])
            except KeyError:
                raise TraceMismatchError(f"unknown control {name!r} at offset {offset}") from None
        if episode.phase is not EpisodePhase.COLLIDED:
            raise TraceMismatchError(f"episode {index} did not terminate at the trace's end")
        run.advance()
        index += 1
    if index != len(traces):
        raise TraceMismatchError(f"trace has {len(traces)} episode(s); simulation used {index}")
    return run.records


def cmd_stats(args) -> int:
    try:
        records, errors = read_records(args.log)
        data = Path(args.file).read_bytes()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for err in errors:
        print(f"warning: {args.log}:{err.line}: {err.message}", file=sys.stderr)
    try:
        simulation = dsl.parse_simulation(data)
        stats = recorder.aggregate_stats(records, simulation)
    except (dsl.SimulationParseError, recorder.UnknownTestNumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"total: {stats.total}")
    for label in sorted(stats.by_outcome):
        print(f"outcome {label}: {stats.by_outcome[label]}")
    if stats.spared_larger_group_rate is None:
        print("spared_larger_group_rate: n/a")
    else:
        print(f"spared_larger_group_rate: {stats.spared_larger_group_rate:.6f}")
    for trait in sorted(stats.by_trait):
        print(f"trait {trait}: {stats.by_trait[trait]}")
    return 1 if errors else 0


def cmd_serve(args) -> int:
    host, port = args.addr
    sink = _open_sink(args.out) if args.out else None
    try:
        server = TrolleyServer(
            args.file,
            params=params_from_env(),
            host=host,
            port=port,
            sink=sink,
            default_mode=args.mode,
            default_pacing=args.pacing,
        )
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except dsl.SimulationParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    server.start()
    host, port = server.address
    # flush so supervisors watching a pipe see the address immediately
    print(f"serving {Path(args.file).name} on {host}:{port} (Ctrl-C to stop)", flush=True)
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        if sink is not None:
            sink.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trolleysim",
        description="Deterministic trolley-problem driving dilemmas: serve, validate, drive, replay, summarize.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the session server")
    p.add_argument("--file", required=True, help="scenario .trly file to serve")
    p.add_argument(
        "--addr",
        type=_parse_addr,
        default=os.environ.get("TROLLEYSIM_ADDR", "127.0.0.1:7777"),
        help="listen address host:port (env TROLLEYSIM_ADDR)",
    )
    p.add_argument("--mode", type=_parse_mode, default=Mode.all(), help="default session mode")
    p.add_argument(
        "--pacing", choices=("realtime", "lockstep"), default="realtime", help="default pacing"
    )
    p.add_argument("--out", help="decision log sink: file path or tcp://host:port")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate", help="lint a scenario file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("agent", help="drive a scripted policy to SIM_END")
    p.add_argument("target", help="scenario file (in-process) or host:port (socket)")
    p.add_argument("--policy", choices=POLICY_NAMES, default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", type=_parse_mode, default=Mode.all())
    p.add_argument("--out", help="also write the decision log here")
    p.add_argument("--trace-out", help="write the action trace bundle here")
    p.set_defaults(func=cmd_agent)

    p = sub.add_parser("replay", help="re-run a recorded trace; logs reproduce byte-for-byte")
    p.add_argument("file", help="scenario .trly file")
    p.add_argument("trace", help="trace bundle from agent --trace-out")
    p.add_argument("--out", help="write the replayed decision log here")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("stats", help="summarize a decision log")
    p.add_argument("log", help="decision log (.tsv lines)")
    p.add_argument("file", help="scenario .trly file the log refers to")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if isinstance(getattr(args, "addr", None), str):
        args.addr = _parse_addr(args.addr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
