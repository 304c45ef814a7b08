"""Minimal JSON-over-HTTP / NDJSON-over-stdio server shared by all services.

Deliberately self-contained: the adapter is a separate deployable and talks
to clients only through the documented wire schemas.
"""
from __future__ import annotations

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Mapping

from .config import PROTOCOL_VERSION

Handler = Callable[[dict], dict]


class RequestError(Exception):
    """Client-visible request problem (maps to HTTP 400 / error response)."""


def check_version(payload: dict) -> None:
    version = payload.get("protocol_version")
    if version is None:
        raise RequestError("missing protocol_version field")
    if str(version) != PROTOCOL_VERSION:
        raise RequestError(f"unknown protocol_version {version!r} (expected {PROTOCOL_VERSION!r})")


def http_server(routes: Mapping[str, Handler], host: str, port: int) -> ThreadingHTTPServer:
    table = dict(routes)

    class _Handler(BaseHTTPRequestHandler):
        def do_POST(self):  # noqa: N802 (http.server API)
            handler = table.get(self.path)
            if handler is None and len(table) == 1:
                handler = next(iter(table.values()))
            if handler is None:
                self._reply(404, {"error": f"no service at {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                if not isinstance(payload, dict):
                    raise RequestError("request is not a JSON object")
                self._reply(200, handler(payload))
            except RequestError as exc:
                self._reply(400, {"error": str(exc)})
            except json.JSONDecodeError as exc:
                self._reply(400, {"error": f"request is not valid JSON: {exc}"})
            except Exception as exc:  # pragma: no cover - defensive
                self._reply(500, {"error": f"{type(exc).__name__}: {exc}"})

        def _reply(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, fmt, *args):
            pass

    return ThreadingHTTPServer((host, port), _Handler)


def stdio_loop(handler: Handler, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            payload = json.loads(line)
            if not isinstance(payload, dict):
                raise RequestError("request is not a JSON object")
            response = handler(payload)
        except RequestError as exc:
            response = {"error": str(exc)}
        except json.JSONDecodeError as exc:
            response = {"error": f"request is not valid JSON: {exc}"}
        except Exception as exc:  # pragma: no cover - defensive
            response = {"error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
