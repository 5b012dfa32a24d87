"""Command line for the platform.

Subcommands: serve (registry), push, publish, search, pull, deploy, predict,
and pipeline validate/run.  Client settings resolve flags first, then the
environment (MODELPORT_REGISTRY, MODELPORT_TOKEN, MODELPORT_DATA_DIR), then the
config file; ``serve`` consults the config file before the environment.
``--output machine`` emits exactly one JSON document on stdout, with logs on
stderr.  Exit codes: 0 success, 1 user error, 2 serve bind or configuration
failure, 3 remote error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import tempfile
import threading
from pathlib import Path
from typing import Any

from . import bundle as bundlemod
from . import composer, errors
from .client import RegistryClient, predict_remote
from .httpkit import loads_strict
from .registry import RegistryService
from .runner import emit_container_recipe, materialize, materialize_dir, spawn

log = logging.getLogger("modelport.cli")

DEFAULT_SERVE_LISTEN = "127.0.0.1:8080"

EXIT_OK = 0
EXIT_USER = 1
EXIT_SERVE = 2
EXIT_REMOTE = 3

_REMOTE_ERRORS = (
    errors.UnavailableError,
    errors.StorageError,
    errors.TimeoutError,
    errors.ExecutorError,
    errors.OutputValidationError,
    errors.ProtocolError,
    errors.BusyError,
    errors.NodeError,
    errors.BindError,
    errors.SpawnError,
)


def _exit_code(exc: errors.ModelPortError) -> int:
    if isinstance(exc, errors.PortError):
        return EXIT_SERVE
    if isinstance(exc, _REMOTE_ERRORS):
        return EXIT_REMOTE
    return EXIT_USER


class Ctx:
    """Resolved configuration plus output mode."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = self._load_config(args.config)
        self.output = args.output or self.config.get("output") or "human"

    @staticmethod
    def _load_config(flag_path: str | None) -> dict[str, Any]:
        path = flag_path or os.environ.get("MODELPORT_CONFIG")
        if path is None:
            path = os.path.join(
                os.environ.get("XDG_CONFIG_HOME", os.path.expanduser("~/.config")),
                "modelport",
                "config.json",
            )
        try:
            with open(path, "rb") as f:
                doc = json.load(f)
        except FileNotFoundError:
            return {}
        except (OSError, json.JSONDecodeError) as exc:
            raise errors.ParseError(f"config file {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise errors.ParseError(f"config file {path}: must be an object")
        return doc

    def _resolve(self, flag: str | None, env: str, key: str, serve_order: bool = False) -> str | None:
        candidates = (
            (flag, self.config.get(key), os.environ.get(env))
            if serve_order
            else (flag, os.environ.get(env), self.config.get(key))
        )
        for value in candidates:
            if value:
                return str(value)
        return None

    def registry(self, required: bool = True) -> str | None:
        value = self._resolve(self.args.registry, "MODELPORT_REGISTRY", "registry")
        if required and not value:
            raise errors.ContractError(
                "no registry configured (use --registry, MODELPORT_REGISTRY, or the config file)"
            )
        return value

    def token(self, required: bool = False) -> str | None:
        value = self._resolve(self.args.token, "MODELPORT_TOKEN", "token")
        if required and not value:
            raise errors.UnauthorizedError(
                "no owner token configured (use --token, MODELPORT_TOKEN, or the config file)"
            )
        return value

    def data_dir(self, serve_order: bool = False) -> str | None:
        return self._resolve(self.args.data_dir, "MODELPORT_DATA_DIR", "data_dir", serve_order)

    def client(self, need_token: bool = False) -> RegistryClient:
        return RegistryClient(self.registry(), token=self.token(required=need_token))

    def emit(self, doc: dict[str, Any], human: str | None = None) -> None:
        if self.output == "machine":
            sys.stdout.write(json.dumps(doc, ensure_ascii=False) + "\n")
        else:
            sys.stdout.write((human if human is not None else json.dumps(doc, indent=2, ensure_ascii=False)) + "\n")
        sys.stdout.flush()

    def emit_error(self, exc: errors.ModelPortError) -> None:
        if self.output == "machine":
            sys.stdout.write(json.dumps(errors.error_document(exc), ensure_ascii=False) + "\n")
            sys.stdout.flush()
        print(f"error: {exc}", file=sys.stderr)
        for violation in getattr(exc, "violations", []) or []:
            print(f"  - {violation}", file=sys.stderr)


def _trap_stop_signals() -> threading.Event:
    """Install handlers before the service exists so an early signal still
    shuts down cleanly instead of killing the process mid-start."""
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    return stop


# -- commands ----------------------------------------------------------------


def cmd_serve(ctx: Ctx, args: argparse.Namespace) -> int:
    stop = _trap_stop_signals()
    data_dir = ctx.data_dir(serve_order=True)
    if not data_dir:
        print("error: serve needs a data directory (--data-dir or MODELPORT_DATA_DIR)", file=sys.stderr)
        return EXIT_SERVE
    listen = args.listen or ctx.config.get("listen") or DEFAULT_SERVE_LISTEN
    try:
        service = RegistryService(data_dir, listen=listen, payload_cap=args.payload_cap)
    except (errors.PortError, errors.StorageError, ValueError, OSError) as exc:
        print(f"error: cannot start registry: {exc}", file=sys.stderr)
        return EXIT_SERVE
    service.start()
    ctx.emit(
        {"event": "serving", "endpoint": service.endpoint, "data_dir": str(data_dir)},
        human=f"registry serving on {service.endpoint} (data in {data_dir})",
    )
    log.info("registry listening on %s", service.endpoint)
    stop.wait()
    service.stop()
    return EXIT_OK


def cmd_push(ctx: Ctx, args: argparse.Namespace) -> int:
    try:
        archive = Path(args.bundle).read_bytes()
    except OSError as exc:
        raise errors.ContractError(f"cannot read bundle file: {exc}") from exc
    doc = ctx.client(need_token=True).upload(archive)
    suffix = " (duplicate)" if doc.get("duplicate") else ""
    ctx.emit(doc, human=f"{doc['model_id']} rev {doc['rev']} digest {doc['digest']}{suffix}")
    return EXIT_OK


def cmd_publish(ctx: Ctx, args: argparse.Namespace) -> int:
    doc = ctx.client(need_token=True).publish(args.model_id, args.rev, args.description, args.category)
    ctx.emit(
        doc,
        human=f"published {doc['model_id']} rev {doc['rev']} "
        f"[{doc['meta']['category']}] {doc['meta']['description']}",
    )
    return EXIT_OK


def cmd_search(ctx: Ctx, args: argparse.Namespace) -> int:
    doc = ctx.client().search(
        text=args.text or "",
        category=args.category,
        toolkit=args.toolkit,
        limit=args.limit,
        offset=args.offset,
    )
    lines = [f"{doc['total']} result(s)"]
    for entry in doc["entries"]:
        meta = entry["meta"]
        lines.append(
            f"{entry['model_id']} rev {entry['rev']} {meta['model_name']}"
            f" [{meta['category']}] {meta['description']}"
        )
    ctx.emit(doc, human="\n".join(lines))
    return EXIT_OK


def cmd_pull(ctx: Ctx, args: argparse.Namespace) -> int:
    client = ctx.client()
    metadata = client.get_metadata(args.model_id, args.rev)
    data = client.fetch_bundle(args.model_id, args.rev)
    actual = bundlemod.digest(bundlemod.unpack(data))
    dest = Path(args.dest or f"{args.model_id}_r{args.rev}.zip")
    if actual != metadata["digest"]:
        dest.unlink(missing_ok=True)  # never leave a bad file behind
        raise errors.ValidationError(
            f"digest mismatch: registry says {metadata['digest']}, content is {actual}"
        )
    dest.write_bytes(data)
    doc = {
        "model_id": args.model_id,
        "rev": args.rev,
        "digest": actual,
        "path": str(dest),
        "bytes": len(data),
    }
    ctx.emit(doc, human=f"pulled {args.model_id} rev {args.rev} -> {dest} ({len(data)} bytes)")
    return EXIT_OK


def _load_deploy_bundle(ctx: Ctx, target: str) -> tuple[bytes | None, Path | None]:
    """A deploy target is an archive file, an extracted directory, or a model ref."""
    path = Path(target)
    if path.is_dir():
        return None, path
    if path.is_file():
        return path.read_bytes(), None
    ref, _, rev_text = target.partition("@")
    client = ctx.client()
    if rev_text:
        try:
            rev = int(rev_text)
        except ValueError:
            raise errors.ContractError(f"bad revision in model ref {target!r}") from None
    else:
        rev = client.get_metadata(ref)["rev"]
    return client.fetch_bundle(ref, rev), None


def cmd_deploy(ctx: Ctx, args: argparse.Namespace) -> int:
    stop = _trap_stop_signals()
    archive, directory = _load_deploy_bundle(ctx, args.target)
    if args.recipe:
        b = bundlemod.read_dir(directory) if directory else bundlemod.unpack(archive)
        text = emit_container_recipe(b)
        ctx.emit({"recipe": text}, human=text.rstrip("\n"))
        return EXIT_OK
    options = {
        "listen": args.listen,
        "executor_timeout_ms": args.executor_timeout_ms,
        "max_inflight": args.max_inflight,
    }
    if directory is not None:
        config = materialize_dir(directory, **options)
    else:
        workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="modelport-"))
        config = materialize(archive, workdir, **options)
    instance = spawn(config)
    ctx.emit(
        {
            "endpoint": instance.endpoint,
            "instance_id": instance.instance_id,
            "pid": instance.pid,
            "model_name": config.model_name,
            "fingerprint": instance.fingerprint,
        },
        human=f"serving {config.model_name} on {instance.endpoint} (pid {instance.pid})",
    )
    log.info("instance %s ready on %s", instance.instance_id, instance.endpoint)
    stop.wait()
    instance.stop()
    return EXIT_OK


def _read_message(path: str) -> dict:
    data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    doc = loads_strict(data)
    if not isinstance(doc, dict):
        raise errors.ParseError("message must be an object")
    return doc


def cmd_predict(ctx: Ctx, args: argparse.Namespace) -> int:
    message = _read_message(args.message)
    output = predict_remote(args.endpoint, args.method, message)
    ctx.emit(output)
    return EXIT_OK


def cmd_pipeline_validate(ctx: Ctx, args: argparse.Namespace) -> int:
    graph = composer.load_graph(Path(args.document).read_bytes())
    violations = composer.validate_graph(graph)
    doc = {"valid": not violations, "violations": violations}
    human = "valid" if not violations else "invalid:\n" + "\n".join(f"  - {v}" for v in violations)
    ctx.emit(doc, human=human)
    return EXIT_OK if not violations else EXIT_USER


def cmd_pipeline_run(ctx: Ctx, args: argparse.Namespace) -> int:
    graph = composer.load_graph(Path(args.document).read_bytes())
    plan = composer.plan(graph)
    envelope = composer.execute(plan, _read_message(args.input))
    ctx.emit(envelope)
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelport", description=__doc__.splitlines()[0])
    parser.add_argument("--registry", help="registry base URL")
    parser.add_argument("--token", help="owner token")
    parser.add_argument("--data-dir", help="registry data directory")
    parser.add_argument("--config", help="config file path")
    parser.add_argument("--output", choices=("human", "machine"), help="output mode")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the registry")
    p.add_argument("--listen", help=f"host:port (default {DEFAULT_SERVE_LISTEN})")
    p.add_argument("--payload-cap", type=int, default=None, help="payload size cap in bytes")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("push", help="upload a bundle")
    p.add_argument("bundle", help="bundle archive path")
    p.set_defaults(func=cmd_push)

    p = sub.add_parser("publish", help="publish an uploaded revision")
    p.add_argument("model_id")
    p.add_argument("rev", type=int)
    p.add_argument("--description", required=True)
    p.add_argument("--category", required=True)
    p.set_defaults(func=cmd_publish)

    p = sub.add_parser("search", help="search the catalog")
    p.add_argument("text", nargs="?", default="")
    p.add_argument("--category")
    p.add_argument("--toolkit")
    p.add_argument("--limit", type=int)
    p.add_argument("--offset", type=int)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("pull", help="download a published revision")
    p.add_argument("model_id")
    p.add_argument("rev", type=int)
    p.add_argument("-o", "--dest", help="output file (default <model_id>_r<rev>.zip)")
    p.set_defaults(func=cmd_pull)

    p = sub.add_parser("deploy", help="run a bundle as a live instance")
    p.add_argument("target", help="bundle path, extracted directory, or model ref id[@rev]")
    p.add_argument("--listen", default="127.0.0.1:0", help="host:port (default ephemeral)")
    p.add_argument("--workdir", help="working directory (default under the temp dir)")
    p.add_argument("--recipe", action="store_true", help="print a container recipe instead")
    p.add_argument("--executor-timeout-ms", type=int, default=30_000)
    p.add_argument("--max-inflight", type=int, default=8)
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("predict", help="call one method of a live instance")
    p.add_argument("endpoint")
    p.add_argument("method")
    p.add_argument("message", help="message file, or - for stdin")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("pipeline", help="validate or run a pipeline document")
    psub = p.add_subparsers(dest="pipeline_command", required=True)
    v = psub.add_parser("validate", help="bind endpoints and report violations")
    v.add_argument("document")
    v.set_defaults(func=cmd_pipeline_validate)
    r = psub.add_parser("run", help="execute a pipeline on one message")
    r.add_argument("document")
    r.add_argument("--input", required=True, help="message file, or - for stdin")
    r.set_defaults(func=cmd_pipeline_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    ctx: Ctx | None = None
    try:
        ctx = Ctx(args)
        return args.func(ctx, args)
    except errors.ModelPortError as exc:
        if ctx is not None:
            ctx.emit_error(exc)
        else:
            print(f"error: {exc}", file=sys.stderr)
        # everything that stops serve from coming up is a config failure
        if args.command == "serve":
            return EXIT_SERVE
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except KeyboardInterrupt:
        return EXIT_OK


def entrypoint() -> None:
    raise SystemExit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
