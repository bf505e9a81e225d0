"""Newline-delimited JSON over TCP: framing helpers shared by the proxy and
edge servers and their clients."""

from __future__ import annotations

import json
import socket
import socketserver
import threading

MAX_LINE = 1 << 22


class WireError(Exception):
    """Malformed frame or a closed connection."""


def encode(message: dict) -> bytes:
    return json.dumps(message, separators=(",", ":"), sort_keys=True).encode() + b"\n"


def decode(line: bytes) -> dict:
    try:
        message = json.loads(line)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireError(f"bad frame: {exc}") from exc
    if not isinstance(message, dict) or "type" not in message:
        raise WireError("frame must be a JSON object with a 'type'")
    return message


def parse_hostport(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


class Connection:
    """One persistent client connection; requests are serialized."""

    def __init__(self, address: str, timeout: float = 5.0):
        self.address = address
        self.timeout = timeout
        self._sock = None
        self._file = None
        self._lock = threading.Lock()

    def _connect(self):
        self._sock = socket.create_connection(parse_hostport(self.address), timeout=self.timeout)
        self._file = self._sock.makefile("rb")

    def request(self, message: dict) -> dict:
        with self._lock:
            if self._sock is None:
                self._connect()
            try:
                self._sock.sendall(encode(message))
                line = self._file.readline(MAX_LINE)
            except OSError:
                self.close()
                raise
            if not line:
                self.close()
                raise ConnectionError(f"{self.address} closed the connection")
            return decode(line)

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._file.close()
                self._sock.close()
            finally:
                self._sock = self._file = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            line = self.rfile.readline(MAX_LINE)
            if not line:
                return
            if not line.strip():
                continue
            try:
                reply = self.server.dispatch(decode(line))
            except WireError as exc:
                reply = {"type": "error", "code": "bad_frame", "detail": str(exc)}
            self.wfile.write(encode(reply))
            self.wfile.flush()


class NDJSONServer(socketserver.ThreadingTCPServer):
    """Threaded NDJSON server; subclasses implement ``dispatch(message)``."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _Handler)
        self._thread = None

    @property
    def address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def dispatch(self, message: dict) -> dict:
        raise NotImplementedError

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, name=type(self).__name__, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
