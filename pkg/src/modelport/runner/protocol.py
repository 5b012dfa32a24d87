"""Executor wire protocol, version 1.

Newline-delimited JSON over the executor's stdio, UTF-8.  The executor speaks
first with a hello line carrying its interface fingerprint; afterwards the
platform sends ``predict``/``ping``/``shutdown`` and the executor answers
``result``/``error``/``pong``, correlated by request id and free to answer out
of order.  A line longer than 16 MiB is a protocol violation.
"""
from __future__ import annotations

import json
from typing import Any, BinaryIO

from ..errors import PayloadTooLargeError, ProtocolError

PROTOCOL = 1
MAX_LINE = 16 * 1024 * 1024


def dump_line(doc: dict[str, Any]) -> bytes:
    line = json.dumps(doc, ensure_ascii=False, separators=(",", ":")).encode("utf-8") + b"\n"
    if len(line) > MAX_LINE:
        raise PayloadTooLargeError(f"message of {len(line)} bytes exceeds the {MAX_LINE} byte line cap")
    return line


def read_message(stream: BinaryIO) -> dict[str, Any] | None:
    """Next message, or None at end of stream."""
    line = stream.readline(MAX_LINE + 1)
    if not line:
        return None
    if len(line) > MAX_LINE:
        raise ProtocolError(f"line exceeds the {MAX_LINE} byte cap")
    if not line.endswith(b"\n"):
        return None  # stream ended mid-line
    try:
        doc = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"undecodable protocol line: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("type"), str):
        raise ProtocolError("protocol message must be an object with a 'type'")
    return doc


def hello(fingerprint: str, methods: list[str]) -> dict[str, Any]:
    return {"type": "hello", "protocol": PROTOCOL, "fingerprint": fingerprint, "methods": methods}


def predict(request_id: str, method: str, payload: dict[str, Any]) -> dict[str, Any]:
    return {"type": "predict", "id": request_id, "method": method, "payload": payload}


def result(request_id: str, payload: dict[str, Any]) -> dict[str, Any]:
    return {"type": "result", "id": request_id, "payload": payload}


def error(request_id: str | None, code: str, message: str) -> dict[str, Any]:
    return {"type": "error", "id": request_id, "code": code, "message": message}


def ping(request_id: str) -> dict[str, Any]:
    return {"type": "ping", "id": request_id}


def pong(request_id: str) -> dict[str, Any]:
    return {"type": "pong", "id": request_id}


def shutdown() -> dict[str, Any]:
    return {"type": "shutdown"}
