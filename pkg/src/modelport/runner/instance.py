"""One running model: an executor child process behind an HTTP gateway.

``materialize`` extracts a bundle into a working directory and resolves how to
launch it; ``spawn`` starts the executor, performs the hello handshake (the
executor's reported fingerprint must equal the bundle signature's), and binds
the gateway.  The gateway re-validates every input before it reaches the
executor and every output before it reaches the caller, correlates requests by
id over the single multiplexed pipe, caps in-flight requests, and probes idle
executors when asked for health.
"""
from __future__ import annotations

import os
import shlex
import signal
import subprocess
import sys
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlsplit

from .. import bundle as bundlemod
from .. import errors, httpkit, sigcore
from . import protocol
from .builtins import BUILTINS, parse_entry

STARTING = "starting"
READY = "ready"
DEGRADED = "degraded"
STOPPED = "stopped"

DEFAULT_EXECUTOR_TIMEOUT_MS = 30_000
DEFAULT_HANDSHAKE_TIMEOUT_MS = 10_000
DEFAULT_MAX_INFLIGHT = 8
DEFAULT_PROBE_IDLE_S = 10.0


@dataclass
class InstanceConfig:
    workdir: Path
    signature: sigcore.Signature
    runner: bundlemod.RunnerSpec
    command: list[str]
    model_name: str
    listen: str = "127.0.0.1:0"
    executor_timeout_ms: int = DEFAULT_EXECUTOR_TIMEOUT_MS
    handshake_timeout_ms: int = DEFAULT_HANDSHAKE_TIMEOUT_MS
    max_inflight: int = DEFAULT_MAX_INFLIGHT
    probe_idle_s: float = DEFAULT_PROBE_IDLE_S


def _resolve_command(b: bundlemod.Bundle, workdir: Path) -> list[str]:
    if b.runner.executor_kind == "builtin":
        name, _ = parse_entry(b.runner.entry)
        if name not in BUILTINS:
            raise errors.UnknownBuiltinError(f"no builtin named {name!r}")
        return [sys.executable, "-m", "modelport.runner.builtin_exec", str(workdir)]
    tokens = shlex.split(b.runner.entry)
    payload_path = str(workdir / "payload.bin")
    return [
        t.replace("{payload}", payload_path).replace("{workdir}", str(workdir)) for t in tokens
    ]


def _config_from_bundle(b: bundlemod.Bundle, workdir: Path, **options) -> InstanceConfig:
    violations = bundlemod.validate(b)
    if violations:
        raise errors.ValidationError("bundle does not validate", violations)
    return InstanceConfig(
        workdir=workdir,
        signature=b.signature,
        runner=b.runner,
        command=_resolve_command(b, workdir),
        model_name=b.meta.model_name,
        **options,
    )


def materialize(archive: bytes, workdir: str | Path, **options) -> InstanceConfig:
    """Extract an archive into a working directory, ready to spawn."""
    b = bundlemod.unpack(archive)
    workdir = Path(workdir)
    bundlemod.write_dir(b, workdir)
    return _config_from_bundle(b, workdir, **options)


def materialize_dir(workdir: str | Path, **options) -> InstanceConfig:
    """Use an already extracted bundle directory in place."""
    workdir = Path(workdir)
    return _config_from_bundle(bundlemod.read_dir(workdir), workdir, **options)


class _Pending:
    __slots__ = ("event", "message")

    def __init__(self):
        self.event = threading.Event()
        self.message: dict | None = None


@dataclass
class HealthReport:
    state: str
    pid: int
    uptime_s: float
    requests_served: int
    model_name: str
    fingerprint: str
    last_error: str | None = None

    def doc(self) -> dict:
        return {
            "state": self.state,
            "pid": self.pid,
            "uptime_s": self.uptime_s,
            "requests_served": self.requests_served,
            "model_name": self.model_name,
            "fingerprint": self.fingerprint,
            "last_error": self.last_error,
        }


class ModelInstance:
    """Handle to a spawned executor and its gateway; create via ``spawn``."""

    def __init__(self, config: InstanceConfig):
        self.config = config
        self.instance_id = uuid.uuid4().hex[:12]
        self.fingerprint = sigcore.fingerprint(config.signature)
        self._sig = config.signature
        self._state = STARTING
        self._state_lock = threading.Lock()
        self._stdin_lock = threading.Lock()
        self._pending: dict[str, _Pending] = {}
        self._pending_lock = threading.Lock()
        self._hello: dict | None = None
        self._hello_event = threading.Event()
        self._served = 0
        self._last_error: str | None = None
        self._started_at = time.monotonic()
        self._last_activity = time.monotonic()
        self._proc: subprocess.Popen | None = None
        self._http: httpkit.HttpService | None = None
        self._stderr_log = None
        self._reader: threading.Thread | None = None
        self._inflight = threading.BoundedSemaphore(config.max_inflight)

    # -- lifecycle -------------------------------------------------------------

    def _start(self) -> None:
        self._stderr_log = open(self.config.workdir / "executor.log", "ab")
        try:
            self._proc = subprocess.Popen(
                self.config.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=self._stderr_log,
                cwd=self.config.workdir,
                start_new_session=True,
            )
        except OSError as exc:
            self._stderr_log.close()
            raise errors.SpawnError(f"cannot launch executor: {exc}") from exc
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

        ok = self._hello_event.wait(self.config.handshake_timeout_ms / 1000)
        if not ok:
            self._abort_spawn()
            raise errors.HandshakeError(
                f"no handshake within {self.config.handshake_timeout_ms} ms"
            )
        hello = self._hello
        if hello is None:
            detail = self._stderr_tail()
            self._abort_spawn()
            raise errors.HandshakeError(
                "executor exited before handshake" + (f": {detail}" if detail else "")
            )
        if hello.get("type") != "hello":
            self._abort_spawn()
            raise errors.HandshakeError(f"first message must be hello, got {hello.get('type')!r}")
        if hello.get("protocol") != protocol.PROTOCOL:
            self._abort_spawn()
            raise errors.HandshakeError(f"unsupported protocol {hello.get('protocol')!r}")
        if hello.get("fingerprint") != self.fingerprint:
            self._abort_spawn()
            raise errors.HandshakeError(
                "interface fingerprint mismatch: executor reports "
                f"{hello.get('fingerprint')!r}, bundle declares {self.fingerprint!r}"
            )
        try:
            self._http = httpkit.HttpService(_InstanceHandler, self.config.listen, context=self)
        except errors.PortError:
            self._abort_spawn()
            raise
        self._http.start()
        with self._state_lock:
            self._state = READY

    def _abort_spawn(self) -> None:
        self._kill_executor()
        if self._stderr_log and not self._stderr_log.closed:
            self._stderr_log.close()

    def _stderr_tail(self) -> str:
        try:
            lines = (self.config.workdir / "executor.log").read_bytes().splitlines()
            return lines[-1].decode("utf-8", "replace") if lines else ""
        except OSError:
            return ""

    @property
    def endpoint(self) -> str:
        if self._http is None:
            raise errors.UnavailableError("instance has no endpoint")
        return self._http.endpoint

    @property
    def pid(self) -> int:
        return self._proc.pid if self._proc else -1

    @property
    def state(self) -> str:
        with self._state_lock:
            return self._state

    def _set_state(self, new: str) -> str:
        with self._state_lock:
            if self._state != STOPPED:
                self._state = new
            return self._state

    # -- executor channel --------------------------------------------------------

    def _read_loop(self) -> None:
        stream = self._proc.stdout
        while True:
            try:
                msg = protocol.read_message(stream)
            except errors.ProtocolError as exc:
                self._last_error = str(exc)
                self._kill_executor()
                break
            if msg is None:
                break
            if not self._hello_event.is_set():
                self._hello = msg
                self._hello_event.set()
                continue
            request_id = msg.get("id")
            if msg.get("type") in ("result", "error", "pong") and isinstance(request_id, str):
                with self._pending_lock:
                    pending = self._pending.pop(request_id, None)
                if pending is not None:
                    pending.message = msg
                    pending.event.set()
            # anything unmatched is dropped
        self._executor_gone()

    def _executor_gone(self) -> None:
        with self._state_lock:
            if self._state == READY:
                self._state = DEGRADED
        with self._pending_lock:
            pending, self._pending = list(self._pending.values()), {}
        for p in pending:
            p.event.set()
        self._hello_event.set()

    def _send(self, doc: dict) -> None:
        line = protocol.dump_line(doc)
        with self._stdin_lock:
            self._proc.stdin.write(line)
            self._proc.stdin.flush()

    def _exchange(self, request_id: str, doc: dict, timeout_s: float) -> dict | None:
        """Send one correlated request; None means the executor went away or timed out."""
        pending = _Pending()
        with self._pending_lock:
            self._pending[request_id] = pending
        try:
            self._send(doc)
        except (OSError, ValueError):
            with self._pending_lock:
                self._pending.pop(request_id, None)
            raise errors.UnavailableError("executor pipe is closed") from None
        if not pending.event.wait(timeout_s):
            with self._pending_lock:
                self._pending.pop(request_id, None)
            return None
        return pending.message

    # -- operations ---------------------------------------------------------------

    def predict(self, method: str, payload: dict) -> dict:
        state = self.state
        if state != READY:
            raise errors.UnavailableError(f"instance is {state}")
        msig = self._sig.method(method)
        if msig is None:
            raise errors.MethodNotFoundError(f"no method {method!r}")
        violations = sigcore.validate_message(payload, msig.input)
        if violations:
            raise errors.ValidationError(
                "input message does not conform to the declared input type",
                [str(v) for v in violations],
            )
        if not self._inflight.acquire(blocking=False):
            raise errors.BusyError(
                f"too many requests in flight (cap {self.config.max_inflight})"
            )
        try:
            request_id = uuid.uuid4().hex
            timeout_s = self.config.executor_timeout_ms / 1000
            msg = self._exchange(request_id, protocol.predict(request_id, method, payload), timeout_s)
            if msg is None:
                if self.state != READY or self._proc.poll() is not None:
                    raise errors.UnavailableError("executor exited during request")
                raise errors.TimeoutError(
                    f"method {method!r} did not answer within {self.config.executor_timeout_ms} ms"
                )
            self._last_activity = time.monotonic()
            if msg.get("type") == "error":
                raise errors.ExecutorError(msg.get("code", "error"), msg.get("message", ""))
            output = msg.get("payload")
            violations = sigcore.validate_message(output, msig.output)
            if violations:
                raise errors.OutputValidationError(
                    "executor output does not conform to the declared output type",
                    [str(v) for v in violations],
                )
            self._served += 1
            return output
        finally:
            self._inflight.release()

    def _ping(self) -> bool:
        if self._proc.poll() is not None:
            return False
        request_id = uuid.uuid4().hex
        timeout_s = min(self.config.executor_timeout_ms, 5000) / 1000
        try:
            msg = self._exchange(request_id, protocol.ping(request_id), timeout_s)
        except errors.UnavailableError:
            return False
        if msg is None or msg.get("type") != "pong":
            return False
        self._last_activity = time.monotonic()
        return True

    def health(self) -> HealthReport:
        state = self.state
        if state in (READY, DEGRADED):
            if self._proc.poll() is not None:
                state = self._set_state(DEGRADED)
            elif state == DEGRADED or time.monotonic() - self._last_activity > self.config.probe_idle_s:
                state = self._set_state(READY if self._ping() else DEGRADED)
        return HealthReport(
            state=state,
            pid=self.pid,
            uptime_s=round(time.monotonic() - self._started_at, 3),
            requests_served=self._served,
            model_name=self.config.model_name,
            fingerprint=self.fingerprint,
            last_error=self._last_error,
        )

    def stop(self) -> None:
        with self._state_lock:
            if self._state == STOPPED:
                return
            self._state = STOPPED
        try:
            self._send(protocol.shutdown())
        except (OSError, ValueError):
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._kill_executor()
        if self._http is not None:
            self._http.stop()
        if self._reader is not None:
            self._reader.join(timeout=2)
        for stream in (self._proc.stdin, self._proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        if self._stderr_log and not self._stderr_log.closed:
            self._stderr_log.close()

    def _kill_executor(self) -> None:
        if self._proc is None or self._proc.poll() is not None:
            return
        for sig in (signal.SIGTERM, signal.SIGKILL):
            try:
                os.killpg(self._proc.pid, sig)
            except (ProcessLookupError, PermissionError):
                break
            try:
                self._proc.wait(timeout=2)
                break
            except subprocess.TimeoutExpired:
                continue


def spawn(config: InstanceConfig) -> ModelInstance:
    """Launch the executor, verify the handshake, bind the gateway."""
    instance = ModelInstance(config)
    instance._start()
    return instance


class _InstanceHandler(httpkit.Handler):
    @property
    def inst(self) -> ModelInstance:
        return self.server.context  # type: ignore[attr-defined]

    def do_POST(self) -> None:
        try:
            path = urlsplit(self.path).path
            if not path.startswith("/v1/predict/"):
                raise errors.NotFoundError(f"no such route: POST {path}")
            method = path[len("/v1/predict/") :]
            body = self.read_body(protocol.MAX_LINE)
            payload = httpkit.loads_strict(body)
            if not isinstance(payload, dict):
                raise errors.ParseError("input message must be an object")
            output = self.inst.predict(method, payload)
            self.send_json(200, output)
        except Exception as exc:
            self.send_error_doc(exc)

    def do_GET(self) -> None:
        try:
            path = urlsplit(self.path).path
            if path == "/v1/health":
                report = self.inst.health()
                self.send_json(200 if report.state == READY else 503, report.doc())
            elif path == "/v1/signature":
                self.send_json(200, sigcore.to_document(self.inst._sig))
            else:
                raise errors.NotFoundError(f"no such route: GET {path}")
        except Exception as exc:
            self.send_error_doc(exc)
