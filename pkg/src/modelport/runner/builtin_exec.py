"""Child-process entry point for builtin executors.

Run as ``python -m modelport.runner.builtin_exec <workdir>`` against a
materialized bundle directory; speaks protocol v1 on stdio.
"""
from __future__ import annotations

import sys
from pathlib import Path

from .. import bundle as bundlemod
from .. import sigcore
from . import protocol
from .builtins import BUILTINS, parse_entry


def main(argv: list[str]) -> int:
    if len(argv) != 1:
        print("usage: builtin_exec <workdir>", file=sys.stderr)
        return 2
    workdir = Path(argv[0])
    b = bundlemod.read_dir(workdir)
    name, params = parse_entry(b.runner.entry)
    factory = BUILTINS.get(name)
    if factory is None:
        print(f"unknown builtin {name!r}", file=sys.stderr)
        return 2
    handler = factory(params, b.signature, b.payload)

    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def send(doc: dict) -> None:
        stdout.write(protocol.dump_line(doc))
        stdout.flush()

    send(protocol.hello(sigcore.fingerprint(b.signature), list(b.signature.method_names())))
    while True:
        try:
            msg = protocol.read_message(stdin)
        except protocol.ProtocolError as exc:
            send(protocol.error(None, "decode_error", str(exc)))
            continue
        if msg is None:
            return 0
        kind = msg["type"]
        if kind == "shutdown":
            return 0
        if kind == "ping":
            send(protocol.pong(msg.get("id")))
            continue
        if kind == "predict":
            request_id = msg.get("id")
            try:
                payload = handler(msg["method"], msg["payload"])
            except Exception as exc:
                send(protocol.error(request_id, "user_error", f"{type(exc).__name__}: {exc}"))
                continue
            send(protocol.result(request_id, payload))
            continue
        send(protocol.error(msg.get("id"), "decode_error", f"unexpected message type {kind!r}"))


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
