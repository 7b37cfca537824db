"""Minimal server-side WebSocket (RFC 6455) framing for the browser client.

Only what the UI session needs: the HTTP upgrade handshake, masked
client-to-server text frames (with continuation), unmasked server-to-client
text frames, and ping/close handling. One protocol message travels per
text frame; the JSON payloads are identical to the raw TCP line protocol.
"""

from __future__ import annotations

import base64
import hashlib
import struct
from typing import IO, Callable

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WsError(ConnectionError):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def parse_http_request(raw: bytes) -> tuple[str, str, dict[str, str]]:
    """(method, path, lowercase headers) from a raw request head."""
    head = raw.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = head.split("\r\n")
    parts = lines[0].split(" ")
    if len(parts) < 3:
        raise WsError(f"bad request line: {lines[0]!r}")
    headers: dict[str, str] = {}
    for line in lines[1:]:
        name, sep, value = line.partition(":")
        if sep:
            headers[name.strip().lower()] = value.strip()
    return parts[0], parts[1], headers


def handshake_response(headers: dict[str, str]) -> bytes:
    key = headers.get("sec-websocket-key")
    if headers.get("upgrade", "").lower() != "websocket" or not key:
        raise WsError("not a websocket upgrade request")
    return (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n"
        "\r\n"
    ).encode("ascii")


def encode_frame(payload: bytes, opcode: int = OP_TEXT) -> bytes:
    """Server frames are unmasked; FIN always set (no fragmented sends)."""
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def _read_exact(stream: IO[bytes], n: int) -> bytes:
    data = b""
    while len(data) < n:
        chunk = stream.read(n - len(data))
        if not chunk:
            raise WsError("connection closed mid-frame")
        data += chunk
    return data


def read_frame(stream: IO[bytes]) -> tuple[int, bool, bytes]:
    """Read one frame -> (opcode, fin, unmasked payload)."""
    b1, b2 = _read_exact(stream, 2)
    fin = bool(b1 & 0x80)
    opcode = b1 & 0x0F
    masked = bool(b2 & 0x80)
    length = b2 & 0x7F
    if length == 126:
        (length,) = struct.unpack(">H", _read_exact(stream, 2))
    elif length == 127:
        (length,) = struct.unpack(">Q", _read_exact(stream, 8))
    if length > 1 << 24:
        raise WsError(f"frame too large: {length}")
    mask = _read_exact(stream, 4) if masked else b""
    payload = _read_exact(stream, length) if length else b""
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, fin, payload


def read_message_frame(stream: IO[bytes], send_raw: Callable[[bytes], None]) -> bytes | None:
    """Read one complete text message, transparently answering pings and
    acknowledging close via send_raw (which must serialize with other
    writers). Returns the payload, or None when the peer closed."""
    buffer = b""
    in_message = False
    while True:
        opcode, fin, payload = read_frame(stream)
        if opcode == OP_PING:
            send_raw(encode_frame(payload, OP_PONG))
            continue
        if opcode == OP_PONG:
            continue
        if opcode == OP_CLOSE:
            try:
                send_raw(encode_frame(payload[:2], OP_CLOSE))
            except OSError:
                pass
            return None
        if opcode in (OP_TEXT, OP_BINARY):
            if in_message:
                raise WsError("new message started before previous finished")
            buffer = payload
            in_message = True
        elif opcode == OP_CONT:
            if not in_message:
                raise WsError("continuation frame without a message")
            buffer += payload
        else:
            raise WsError(f"unsupported opcode {opcode}")
        if fin and in_message:
            return buffer
