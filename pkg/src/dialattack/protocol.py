"""JSON wire transports shared by the victim, synonym, encoder and grammar services.

Two interchangeable transports carry the same request/response dictionaries:
JSON over HTTP POST, or newline-delimited JSON over a spawned subprocess's
stdio. Transport failures (unreachable peer, timeout, broken pipe) raise
:class:`TransportError`; a delivered-but-invalid exchange (bad version,
malformed payload, error response) raises :class:`ProtocolError` so callers
can tell infrastructure problems from model problems.
"""
from __future__ import annotations

import json
import shlex
import subprocess
import sys
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Mapping

PROTOCOL_VERSION = "1"

Handler = Callable[[dict], dict]


class TransportError(Exception):
    """The peer could not be reached or the connection broke mid-exchange."""


class ProtocolError(Exception):
    """The peer answered, but the exchange violated the wire protocol."""


def require_version(payload: dict) -> None:
    """Reject requests without the mandatory protocol_version field."""
    version = payload.get("protocol_version")
    if version is None:
        raise ProtocolError("missing protocol_version field")
    if str(version) != PROTOCOL_VERSION:
        raise ProtocolError(f"unknown protocol_version {version!r} (expected {PROTOCOL_VERSION!r})")


class HttpTransport:
    """POSTs one JSON request per call to a fixed URL."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def request(self, payload: dict) -> dict:
        body = json.dumps(payload).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read()
        except urllib.error.HTTPError as exc:
            # Delivered HTTP error: surface the server's error payload if any.
            detail = exc.read().decode("utf-8", "replace")
            try:
                message = json.loads(detail).get("error", detail)
            except (json.JSONDecodeError, AttributeError):
                message = detail
            raise ProtocolError(f"HTTP {exc.code}: {message}") from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError, OSError) as exc:
            raise TransportError(f"victim endpoint unreachable: {exc}") from exc
        try:
            parsed = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ProtocolError(f"response is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise ProtocolError(f"response is not a JSON object: {type(parsed).__name__}")
        if "error" in parsed:
            raise ProtocolError(str(parsed["error"]))
        return parsed

    def close(self) -> None:  # symmetry with StdioTransport
        pass


class StdioTransport:
    """Talks newline-delimited JSON to a spawned subprocess.

    The process is started lazily on first request and kept alive for reuse;
    the protocol is stateless so one request maps to exactly one response
    line. A lock serializes concurrent callers onto the single pipe pair.
    """

    def __init__(self, command: str | list[str]):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.DEVNULL,
                    text=True,
                )
            except OSError as exc:
                raise TransportError(f"cannot spawn {self.command[0]!r}: {exc}") from exc
        return self._proc

    def request(self, payload: dict) -> dict:
        with self._lock:
            proc = self._ensure_proc()
            try:
                assert proc.stdin is not None and proc.stdout is not None
                proc.stdin.write(json.dumps(payload) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError, ValueError) as exc:
                raise TransportError(f"stdio victim pipe broke: {exc}") from exc
        if not line:
            raise TransportError("stdio victim closed its output (EOF)")
        try:
            parsed = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"response line is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise ProtocolError("response is not a JSON object")
        if "error" in parsed:
            raise ProtocolError(str(parsed["error"]))
        return parsed

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
            self._proc = None


def make_http_server(routes: Mapping[str, Handler] | Handler, host: str = "127.0.0.1",
                     port: int = 0) -> ThreadingHTTPServer:
    """Build (but do not start) an HTTP server dispatching POSTed JSON to handlers.

    ``routes`` maps URL paths to handler callables; a bare callable serves
    every path. Handlers raising :class:`ProtocolError` produce a 400 with an
    ``{"error": ...}`` body, anything else a 500.
    """
    if callable(routes):
        table: dict[str, Handler] = {}
        fallback: Handler | None = routes
    else:
        table = dict(routes)
        fallback = None

    class _RequestHandler(BaseHTTPRequestHandler):
        def do_POST(self) -> None:  # noqa: N802 (http.server API)
            handler = table.get(self.path, fallback)
            if handler is None:
                self._reply(404, {"error": f"no service at {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                if not isinstance(payload, dict):
                    raise ProtocolError("request is not a JSON object")
                response = handler(payload)
            except ProtocolError as exc:
                self._reply(400, {"error": str(exc)})
            except json.JSONDecodeError as exc:
                self._reply(400, {"error": f"request is not valid JSON: {exc}"})
            except Exception as exc:  # pragma: no cover - defensive
                self._reply(500, {"error": f"{type(exc).__name__}: {exc}"})
            else:
                self._reply(200, response)

        def _reply(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, fmt: str, *args) -> None:  # silence per-request noise
            pass

    return ThreadingHTTPServer((host, port), _RequestHandler)


def serve_stdio(handler: Handler, stdin=None, stdout=None) -> None:
    """Serve one JSON request per input line until EOF (blocking)."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            payload = json.loads(line)
            if not isinstance(payload, dict):
                raise ProtocolError("request is not a JSON object")
            response = handler(payload)
        except ProtocolError as exc:
            response = {"error": str(exc)}
        except json.JSONDecodeError as exc:
            response = {"error": f"request is not valid JSON: {exc}"}
        except Exception as exc:  # pragma: no cover - defensive
            response = {"error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
