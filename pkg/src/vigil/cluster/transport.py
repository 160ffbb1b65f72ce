"""Node-to-node transport.

One contract, two implementations: an in-process bus for tests and
single-host runs, and a length-prefixed TCP protocol for real clusters.

Wire frame: 4-byte big-endian unsigned length, then exactly that many
bytes of UTF-8 JSON holding the message envelope
``{"msg_type": str, "term": int, "sender": str, "payload": object}``.
One frame per connection; no response stream (election traffic is
fire-and-forget).
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading

from ..errors import InvalidInput

MAX_FRAME_BYTES = 1 << 20

_LEN = struct.Struct(">I")


def encode_frame(envelope: dict) -> bytes:
    for key in ("msg_type", "term", "sender", "payload"):
        if key not in envelope:
            raise InvalidInput("envelope missing field", field=key)
    body = json.dumps(envelope, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_FRAME_BYTES:
        raise InvalidInput("frame too large", size=len(body))
    return _LEN.pack(len(body)) + body


def decode_frame(data: bytes) -> dict:
    if len(data) < _LEN.size:
        raise InvalidInput("short frame header")
    (length,) = _LEN.unpack(data[:_LEN.size])
    if length > MAX_FRAME_BYTES:
        raise InvalidInput("frame too large", size=length)
    body = data[_LEN.size:_LEN.size + length]
    if len(body) != length:
        raise InvalidInput("truncated frame", expected=length, got=len(body))
    try:
        envelope = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidInput("undecodable frame") from exc
    if not isinstance(envelope, dict):
        raise InvalidInput("envelope must be an object")
    return envelope


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class InProcessBus:
    """Synchronous local delivery keyed by node id; unknown targets drop."""

    def __init__(self):
        self._handlers: dict[str, object] = {}
        self._lock = threading.Lock()
        self.dropped = 0

    def register(self, node_id: str, handler) -> None:
        with self._lock:
            self._handlers[node_id] = handler

    def unregister(self, node_id: str) -> None:
        with self._lock:
            self._handlers.pop(node_id, None)

    def send(self, to: str, envelope: dict) -> None:
        with self._lock:
            handler = self._handlers.get(to)
        if handler is None:
            self.dropped += 1
            return
        handler(envelope)


class TcpTransport:
    """Listens for frames and hands decoded envelopes to one handler."""

    def __init__(self, host: str, port: int, handler,
                 peers: dict[str, tuple[str, int]] | None = None):
        self.peers = dict(peers or {})
        self._handler = handler
        outer = self

        class _Handler(socketserver.BaseRequestHandler):
            def handle(self):
                header = _read_exact(self.request, _LEN.size)
                if len(header) < _LEN.size:
                    return
                (length,) = _LEN.unpack(header)
                if length > MAX_FRAME_BYTES:
                    return
                body = _read_exact(self.request, length)
                try:
                    envelope = decode_frame(header + body)
                except InvalidInput:
                    return  # malformed frames are dropped at the edge
                outer._handler(envelope)

        self._server = socketserver.ThreadingTCPServer((host, port), _Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address

    def start(self) -> None:
        self._thread.start()

    def send(self, to: str, envelope: dict) -> None:
        addr = self.peers.get(to)
        if addr is None:
            return
        frame = encode_frame(envelope)
        try:
            with socket.create_connection(addr, timeout=1.0) as sock:
                sock.sendall(frame)
        except OSError:
            pass  # unreachable peer behaves like a lost message

    def close(self) -> None:
        # shutdown() blocks unless serve_forever is running
        if self._thread.is_alive():
            self._server.shutdown()
        self._server.server_close()
