"""Session server: streams observations and applies actions for one
controlling client per session.

Two transports share one listen port and identical JSON payloads: raw TCP
with newline-delimited messages (programmatic agents) and WebSocket with
one message per text frame (the browser UI; the port also answers plain
HTTP ``GET /scenarios`` with the served file's scenario list so the UI can
build its start menu). The first byte of a connection picks the transport:
``{`` means the line protocol, anything else is treated as HTTP.

Pacing per session: ``lockstep`` (agents; one ACTION per tick, fully
deterministic) or ``realtime`` (humans; fixed wall-clock tick rate with
sticky last-received control). Sessions are independent; the decision
record sink is shared and serialized.
"""

from __future__ import annotations

import hashlib
import json
import socket
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from . import protocol, ws
from .dsl import parse_simulation
from .model import Mode, Simulation
from .recorder import RecordSink
from .sim import Control, EpisodePhase, SimParams, SimulationRun, TickEventKind

LOCKSTEP_TIMEOUT = 30.0
HANDSHAKE_TIMEOUT = 30.0


class SessionError(Exception):
    """Terminates a session with an ERROR message."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class _LineTransport:
    def __init__(self, rfile, wfile):
        self._r = rfile
        self._w = wfile
        self._lock = threading.Lock()

    def recv(self) -> dict[str, Any] | None:
        return protocol.recv_message(self._r)

    def send(self, msg: dict[str, Any]) -> None:
        with self._lock:
            protocol.send_message(self._w, msg)


class _WsTransport:
    def __init__(self, rfile, wfile):
        self._r = rfile
        self._w = wfile
        self._lock = threading.Lock()

    def _send_raw(self, frame: bytes) -> None:
        with self._lock:
            self._w.write(frame)
            self._w.flush()

    def recv(self) -> dict[str, Any] | None:
        payload = ws.read_message_frame(self._r, self._send_raw)
        if payload is None:
            return None
        return protocol.decode_message(payload)

    def send(self, msg: dict[str, Any]) -> None:
        self._send_raw(ws.encode_frame(protocol.encode_message(msg).rstrip(b"\n")))


@dataclass
class _ServedFile:
    name: str
    sha256: str
    simulation: Simulation


class _Session:
    def __init__(self, server: TrolleyServer, transport, sock: socket.socket):
        self.server = server
        self.transport = transport
        self.sock = sock
        self.run: SimulationRun | None = None

    # -- handshake -------------------------------------------------------

    def parse_config(self, msg: dict[str, Any]) -> dict[str, Any]:
        if msg.get("protocol_version") != protocol.PROTOCOL_VERSION:
            raise SessionError(
                "VERSION_MISMATCH",
                f"server speaks protocol_version {protocol.PROTOCOL_VERSION}",
            )
        if msg.get("type") != "HELLO":
            raise SessionError("PROTOCOL_VIOLATION", "first message must be HELLO")
        config = msg.get("config")
        if not isinstance(config, dict):
            raise SessionError("BAD_CONFIG", "HELLO.config must be an object")
        served = self.server.served
        wanted = config.get("scenario_file", served.name)
        if wanted != served.name:
            raise SessionError("UNKNOWN_SCENARIO_FILE", f"server only serves {served.name!r}")
        role = config.get("role", "agent")
        if role not in ("human", "agent"):
            raise SessionError("BAD_CONFIG", f"role must be human or agent, got {role!r}")
        pacing = config.get("pacing", self.server.default_pacing)
        if pacing not in ("lockstep", "realtime"):
            raise SessionError("BAD_CONFIG", f"pacing must be lockstep or realtime, got {pacing!r}")
        if pacing == "lockstep" and role != "agent":
            raise SessionError("BAD_CONFIG", "lockstep pacing requires role=agent")
        mode_kind = config.get("mode", self.server.default_mode.kind)
        if mode_kind == "all":
            mode = Mode.all()
        elif mode_kind == "single":
            test_num = config.get("test_num", self.server.default_mode.test_num)
            if not isinstance(test_num, int):
                raise SessionError("BAD_CONFIG", "mode single requires an integer test_num")
            if served.simulation.scenario_by_test_num(test_num) is None:
                raise SessionError("BAD_CONFIG", f"no scenario with test_num {test_num}")
            mode = Mode.single(test_num)
        else:
            raise SessionError("BAD_CONFIG", f"mode must be all or single, got {mode_kind!r}")
        seed = config.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise SessionError("BAD_CONFIG", "seed must be an integer")
        return {"role": role, "pacing": pacing, "mode": mode, "seed": seed}

    def session_id(self, seed: int | None) -> str:
        # A client-supplied seed pins the session id, keeping lockstep
        # record lists a pure function of (file, config, actions).
        if seed is not None:
            return f"s{seed}-{self.server.served.sha256[:8]}"
        return uuid.uuid4().hex

    # -- message helpers -------------------------------------------------

    def send_scenario_start(self) -> None:
        assert self.run is not None
        self.transport.send(protocol.scenario_start(self.run.episode.scenario))

    def send_state(self) -> None:
        assert self.run is not None
        self.transport.send(protocol.state(self.run.episode.observation()))

    def finish_episode(self, events) -> bool:
        """COLLISION (victim hits), EPISODE_END, then the next SCENARIO_START
        or the final SIM_END. Returns True when the simulation ended."""
        run = self.run
        assert run is not None
        for event in events:
            if event.kind is TickEventKind.DISPLAY:
                self.transport.send(protocol.collision(event.tick, event.message))
        advance_events = run.advance()
        self.transport.send(protocol.episode_end(run.records[-1]))
        if any(e.kind is TickEventKind.SIMULATION_ENDED for e in advance_events):
            self.transport.send(protocol.sim_end(run.records))
            return True
        self.send_scenario_start()
        return False

    @staticmethod
    def parse_action(msg: dict[str, Any]) -> tuple[int, Control]:
        if msg.get("type") != "ACTION":
            raise SessionError(
                "PROTOCOL_VIOLATION", f"expected ACTION mid-episode, got {msg.get('type')}"
            )
        try:
            control = Control[msg["control"]]
        except (KeyError, TypeError):
            raise SessionError(
                "PROTOCOL_VIOLATION", "control must be LEFT, NONE, or RIGHT"
            ) from None
        tick = msg.get("tick")
        if not isinstance(tick, int):
            raise SessionError("PROTOCOL_VIOLATION", "ACTION.tick must be an integer")
        return tick, control

    # -- pacing loops ----------------------------------------------------

    def lockstep_loop(self) -> None:
        run = self.run
        assert run is not None
        timeout = self.server.lockstep_timeout
        self.sock.settimeout(timeout)
        while True:
            self.send_state()
            pending = run.episode.tick
            try:
                msg = self.transport.recv()
            except (TimeoutError, socket.timeout):
                raise SessionError("TIMEOUT", f"no ACTION within {timeout:.0f} s") from None
            if msg is None:
                return  # client went away; nothing to record
            tick, control = self.parse_action(msg)
            if tick != pending:
                raise SessionError(
                    "PROTOCOL_VIOLATION", f"ACTION.tick {tick} != pending tick {pending}"
                )
            events = run.step(control)
            if run.episode.phase is EpisodePhase.COLLIDED:
                if self.finish_episode(events):
                    return

    def realtime_loop(self) -> None:
        run = self.run
        assert run is not None
        self.sock.settimeout(None)  # humans may idle; the control is sticky
        latest = {"control": Control.NONE}
        violation: list[SessionError] = []
        stop = threading.Event()

        def reader() -> None:
            try:
                while not stop.is_set():
                    msg = self.transport.recv()
                    if msg is None:
                        break
                    # Stale ACTION.tick values are accepted as the current control.
                    _tick, control = self.parse_action(msg)
                    latest["control"] = control
            except SessionError as exc:
                violation.append(exc)
            except (OSError, protocol.MalformedMessageError, ws.WsError):
                pass
            stop.set()

        thread = threading.Thread(target=reader, daemon=True)
        thread.start()
        dt = run.params.dt
        deadline = time.monotonic()
        try:
            self.send_state()
            while not stop.is_set():
                deadline += dt
                delay = deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                events = run.step(latest["control"])
                self.send_state()
                if run.episode.phase is EpisodePhase.COLLIDED:
                    if self.finish_episode(events):
                        return
                    self.send_state()
                    deadline = time.monotonic()
            if violation:
                raise violation[0]
        finally:
            stop.set()

    def handle(self) -> None:
        try:
            try:
                hello = self.transport.recv()
            except protocol.MalformedMessageError as exc:
                raise SessionError("MALFORMED_MESSAGE", str(exc)) from None
            if hello is None:
                return
            config = self.parse_config(hello)
            simulation = Simulation(
                scenarios=self.server.served.simulation.scenarios, mode=config["mode"]
            )
            self.run = SimulationRun(
                simulation,
                self.server.params,
                session_id=self.session_id(config["seed"]),
                subject_role=config["role"],
                sink=self.server.sink,
            )
            self.transport.send(protocol.welcome(self.run.session_id))
            self.send_scenario_start()
            if config["pacing"] == "lockstep":
                self.lockstep_loop()
            else:
                self.realtime_loop()
        except SessionError as exc:
            try:
                self.transport.send(protocol.error(exc.code, str(exc)))
            except OSError:
                pass
        except protocol.MalformedMessageError as exc:
            try:
                self.transport.send(protocol.error("MALFORMED_MESSAGE", str(exc)))
            except OSError:
                pass
        except (OSError, ws.WsError):
            pass  # connection dropped; session state is discarded


class TrolleyServer:
    """Threaded listener; every accepted connection drives its own session."""

    def __init__(
        self,
        scenario_path: str | Path,
        *,
        params: SimParams | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        sink: RecordSink | None = None,
        default_mode: Mode | None = None,
        default_pacing: str = "realtime",
        lockstep_timeout: float = LOCKSTEP_TIMEOUT,
    ):
        path = Path(scenario_path)
        data = path.read_bytes()
        self.served = _ServedFile(
            name=path.name,
            sha256=hashlib.sha256(data).hexdigest(),
            simulation=parse_simulation(data),
        )
        self.params = params or SimParams()
        self.host = host
        self.port = port
        self.sink = sink
        self.default_mode = default_mode or Mode.all()
        self.default_pacing = default_pacing
        self.lockstep_timeout = lockstep_timeout
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._conns: list[socket.socket] = []
        self._lock = threading.Lock()
        self._stopping = threading.Event()

    # -- lifecycle -------------------------------------------------------

    @property
    def address(self) -> tuple[str, int]:
        assert self._listener is not None, "server is not started"
        addr = self._listener.getsockname()
        return addr[0], addr[1]

    def start(self) -> TrolleyServer:
        listener = socket.create_server((self.host, self.port))
        listener.settimeout(0.2)
        self._listener = listener
        thread = threading.Thread(target=self._accept_loop, daemon=True)
        thread.start()
        self._threads.append(thread)
        return self

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            self._listener.close()
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.close()
            except OSError:
                pass

    def __enter__(self) -> TrolleyServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def serve_forever(self) -> None:
        self.start()
        try:
            while not self._stopping.is_set():
                time.sleep(0.2)
        finally:
            self.stop()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, _addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            with self._lock:
                self._conns.append(conn)
            thread = threading.Thread(target=self._handle_conn, args=(conn,), daemon=True)
            thread.start()
            self._threads.append(thread)

    # -- connection routing ----------------------------------------------

    def _scenario_listing(self) -> dict[str, Any]:
        return {
            "files": [
                {
                    "id": self.served.name,
                    "sha256": self.served.sha256,
                    "scenarios": [
                        {"test_num": s.test_num, "name": s.name}
                        for s in self.served.simulation.scenarios
                    ],
                }
            ]
        }

    def _handle_conn(self, conn: socket.socket) -> None:
        try:
            conn.settimeout(HANDSHAKE_TIMEOUT)
            first = conn.recv(1, socket.MSG_PEEK)
            if not first:
                return
            rfile = conn.makefile("rb")
            wfile = conn.makefile("wb")
            if first == b"{":
                session = _Session(self, _LineTransport(rfile, wfile), conn)
                session.handle()
            else:
                self._ws_conn(conn, rfile, wfile)
        except (OSError, ws.WsError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass
            with self._lock:
                if conn in self._conns:
                    self._conns.remove(conn)

    def _ws_conn(self, conn: socket.socket, rfile, wfile) -> None:
        head = b""
        while b"\r\n\r\n" not in head:
            chunk = rfile.readline()
            if not chunk or len(head) > 65536:
                return
            head += chunk
        method, path, headers = ws.parse_http_request(head)
        if headers.get("upgrade", "").lower() == "websocket":
            wfile.write(ws.handshake_response(headers))
            wfile.flush()
            session = _Session(self, _WsTransport(rfile, wfile), conn)
            session.handle()
            return
        if method == "GET" and path.split("?")[0] == "/scenarios":
            body = json.dumps(self._scenario_listing(), sort_keys=True).encode("utf-8")
            wfile.write(
                b"HTTP/1.1 200 OK\r\n"
                b"Content-Type: application/json\r\n"
                b"Access-Control-Allow-Origin: *\r\n"
                + f"Content-Length: {len(body)}\r\n".encode("ascii")
                + b"Connection: close\r\n\r\n"
                + body
            )
        else:
            wfile.write(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n")
        wfile.flush()
