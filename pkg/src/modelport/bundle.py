"""Portable model bundles.

A bundle is a ZIP archive with exactly five entries: ``manifest.json``
(dependency pins plus runtime), ``signature.json`` (interface descriptor),
``meta.json`` (naming and provenance), ``runner.json`` (how to execute), and
``payload.bin`` (opaque model bytes).

The digest is computed over logical entry content, not archive bytes, so
re-archiving with different compression, ordering, or zip timestamps cannot
change a bundle's identity.  JSON entries are hashed in canonical encoding.
"""
from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from . import sigcore
from .errors import ArchiveError, ContractError, PayloadTooLargeError, SchemaError, VersionError
from .util import canonical_bytes, now_rfc3339, parse_rfc3339

ENTRY_NAMES = ("manifest.json", "meta.json", "payload.bin", "runner.json", "signature.json")
PROTOCOL_VERSION = 1
EXECUTOR_KINDS = ("builtin", "external")
DEFAULT_PAYLOAD_CAP = 512 * 1024 * 1024


@dataclass(frozen=True)
class DependencyEntry:
    name: str
    version: str


@dataclass(frozen=True)
class RuntimeInfo:
    language_name: str
    language_version: str


@dataclass(frozen=True)
class DependencyManifest:
    entries: tuple[DependencyEntry, ...] = ()
    runtime: RuntimeInfo = RuntimeInfo("python", "3")


@dataclass(frozen=True)
class RunnerSpec:
    executor_kind: str
    entry: str
    protocol_version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class BundleMeta:
    model_name: str
    creator: str
    created_at: str
    description: str = ""
    category: str = ""
    toolkit: str = ""


@dataclass(frozen=True)
class Bundle:
    meta: BundleMeta
    signature: sigcore.Signature
    manifest: DependencyManifest
    runner: RunnerSpec
    payload: bytes = b""


def new_meta(model_name: str, creator: str, **overrides: str) -> BundleMeta:
    return BundleMeta(model_name, creator, now_rfc3339(), **overrides)


# -- document form -----------------------------------------------------------


def _manifest_doc(m: DependencyManifest) -> dict[str, Any]:
    return {
        "entries": [{"name": e.name, "version": e.version} for e in m.entries],
        "runtime": {
            "language_name": m.runtime.language_name,
            "language_version": m.runtime.language_version,
        },
    }


def meta_doc(m: BundleMeta) -> dict[str, Any]:
    return {
        "model_name": m.model_name,
        "creator": m.creator,
        "created_at": m.created_at,
        "description": m.description,
        "category": m.category,
        "toolkit": m.toolkit,
    }


def _runner_doc(r: RunnerSpec) -> dict[str, Any]:
    return {
        "executor_kind": r.executor_kind,
        "entry": r.entry,
        "protocol_version": r.protocol_version,
    }


def _load_json(name: str, data: bytes) -> Any:
    try:
        return json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{name} is not valid JSON: {exc}") from exc


def _str_field(doc: dict, name: str, entry: str, default: str | None = None) -> str:
    if name not in doc:
        if default is not None:
            return default
        raise SchemaError(f"{entry}: missing field {name!r}")
    if not isinstance(doc[name], str):
        raise SchemaError(f"{entry}: field {name!r} must be a string")
    return doc[name]


def _manifest_from_doc(doc: Any) -> DependencyManifest:
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise SchemaError("manifest.json: expected an object with an 'entries' list")
    entries = []
    for e in doc["entries"]:
        if not isinstance(e, dict):
            raise SchemaError("manifest.json: entry must be an object")
        entries.append(
            DependencyEntry(_str_field(e, "name", "manifest.json"), _str_field(e, "version", "manifest.json"))
        )
    runtime = doc.get("runtime")
    if not isinstance(runtime, dict):
        raise SchemaError("manifest.json: missing 'runtime' object")
    return DependencyManifest(
        tuple(entries),
        RuntimeInfo(
            _str_field(runtime, "language_name", "manifest.json"),
            _str_field(runtime, "language_version", "manifest.json"),
        ),
    )


def meta_from_document(doc: Any) -> BundleMeta:
    if not isinstance(doc, dict):
        raise SchemaError("meta.json: expected an object")
    return BundleMeta(
        model_name=_str_field(doc, "model_name", "meta.json"),
        creator=_str_field(doc, "creator", "meta.json"),
        created_at=_str_field(doc, "created_at", "meta.json"),
        description=_str_field(doc, "description", "meta.json", default=""),
        category=_str_field(doc, "category", "meta.json", default=""),
        toolkit=_str_field(doc, "toolkit", "meta.json", default=""),
    )


def _runner_from_doc(doc: Any) -> RunnerSpec:
    if not isinstance(doc, dict):
        raise SchemaError("runner.json: expected an object")
    version = doc.get("protocol_version")
    if not isinstance(version, int) or isinstance(version, bool):
        raise SchemaError("runner.json: protocol_version must be an integer")
    if version != PROTOCOL_VERSION:
        raise VersionError(f"unsupported protocol_version {version} (only {PROTOCOL_VERSION})")
    return RunnerSpec(
        executor_kind=_str_field(doc, "executor_kind", "runner.json"),
        entry=_str_field(doc, "entry", "runner.json"),
        protocol_version=version,
    )


def entry_documents(b: Bundle) -> dict[str, bytes]:
    """Logical content of each entry; JSON entries in canonical encoding."""
    return {
        "manifest.json": canonical_bytes(_manifest_doc(b.manifest)),
        "meta.json": canonical_bytes(meta_doc(b.meta)),
        "payload.bin": b.payload,
        "runner.json": canonical_bytes(_runner_doc(b.runner)),
        "signature.json": canonical_bytes(sigcore.to_document(b.signature)),
    }


# -- operations ---------------------------------------------------------------


def digest(b: Bundle) -> str:
    """SHA-256 over entry names and contents in sorted-name order."""
    entries = entry_documents(b)
    h = hashlib.sha256()
    for name in sorted(entries):
        h.update(name.encode("utf-8"))
        h.update(b"\x00")
        h.update(entries[name])
        h.update(b"\x00")
    return h.hexdigest()


def validate(b: Bundle, payload_cap: int = DEFAULT_PAYLOAD_CAP) -> list[str]:
    """Semantic checks beyond archive structure; returns violation strings."""
    violations = []
    if not sigcore.IDENT_RE.match(b.meta.model_name or ""):
        violations.append(f"meta.model_name not a valid identifier: {b.meta.model_name!r}")
    if not b.meta.creator:
        violations.append("meta.creator empty")
    try:
        parse_rfc3339(b.meta.created_at)
    except ValueError as exc:
        violations.append(f"meta.created_at not RFC 3339: {exc}")
    seen = set()
    for e in b.manifest.entries:
        if not e.name:
            violations.append("manifest entry with empty name")
        elif e.name in seen:
            violations.append(f"manifest entry duplicated: {e.name}")
        else:
            seen.add(e.name)
        if not e.version:
            violations.append(f"manifest entry {e.name!r} has no pinned version")
    if not b.manifest.runtime.language_name:
        violations.append("manifest.runtime.language_name empty")
    if not b.manifest.runtime.language_version:
        violations.append("manifest.runtime.language_version empty")
    if b.runner.executor_kind not in EXECUTOR_KINDS:
        violations.append(f"runner.executor_kind unknown: {b.runner.executor_kind!r}")
    if not b.runner.entry:
        violations.append("runner.entry empty")
    if b.runner.protocol_version != PROTOCOL_VERSION:
        violations.append(f"runner.protocol_version unsupported: {b.runner.protocol_version}")
    if not b.payload and b.runner.executor_kind == "external":
        violations.append("payload.bin empty but executor_kind is external")
    if len(b.payload) > payload_cap:
        violations.append(f"payload.bin exceeds size cap ({len(b.payload)} > {payload_cap} bytes)")
    return violations


def pack(b: Bundle, *, payload_cap: int = DEFAULT_PAYLOAD_CAP) -> bytes:
    """Serialize to archive bytes; rejects invalid bundles."""
    violations = validate(b, payload_cap)
    if violations:
        raise ContractError("bundle does not validate", violations)
    entries = entry_documents(b)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(entries):
            # fixed timestamp keeps pack() byte-deterministic
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, entries[name])
    return buf.getvalue()


_DOC_ENTRY_CAP = 64 * 1024 * 1024


def unpack(data: bytes, *, payload_cap: int = DEFAULT_PAYLOAD_CAP) -> Bundle:
    """Parse archive bytes; checks structure and embedded documents."""
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise ArchiveError(f"not a readable archive: {exc}") from exc
    with zf:
        names = zf.namelist()
        for required in ENTRY_NAMES:
            if required not in names:
                raise ArchiveError(f"missing entry {required}")
        for name in names:
            if name not in ENTRY_NAMES:
                raise ArchiveError(f"unexpected entry {name}")
        if len(names) != len(ENTRY_NAMES):
            raise ArchiveError("duplicate entries in archive")
        for info in zf.infolist():
            # declared sizes checked before decompressing anything
            cap = payload_cap if info.filename == "payload.bin" else _DOC_ENTRY_CAP
            if info.file_size > cap:
                raise PayloadTooLargeError(
                    f"{info.filename} declares {info.file_size} bytes, cap is {cap}"
                )
        try:
            raw = {name: zf.read(name) for name in ENTRY_NAMES}
        except zipfile.BadZipFile as exc:
            raise ArchiveError(f"corrupt entry: {exc}") from exc
    runner = _runner_from_doc(_load_json("runner.json", raw["runner.json"]))
    sig_doc = _load_json("signature.json", raw["signature.json"])
    try:
        sig = sigcore.from_document(sig_doc)
    except sigcore.ParseError as exc:
        raise SchemaError(f"signature.json: {exc}") from exc
    return Bundle(
        meta=meta_from_document(_load_json("meta.json", raw["meta.json"])),
        signature=sig,
        manifest=_manifest_from_doc(_load_json("manifest.json", raw["manifest.json"])),
        runner=runner,
        payload=raw["payload.bin"],
    )


def with_meta(b: Bundle, **overrides: str) -> Bundle:
    return replace(b, meta=replace(b.meta, **overrides))


def write_dir(b: Bundle, workdir) -> None:
    """Write the five entries as plain files under a directory."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    for name, content in entry_documents(b).items():
        (workdir / name).write_bytes(content)


def read_dir(workdir) -> Bundle:
    """Read back a directory written by ``write_dir`` (or extracted by hand)."""
    workdir = Path(workdir)
    raw = {}
    for name in ENTRY_NAMES:
        path = workdir / name
        if not path.is_file():
            raise ArchiveError(f"missing entry {name}")
        raw[name] = path.read_bytes()
    runner = _runner_from_doc(_load_json("runner.json", raw["runner.json"]))
    sig_doc = _load_json("signature.json", raw["signature.json"])
    try:
        sig = sigcore.from_document(sig_doc)
    except sigcore.ParseError as exc:
        raise SchemaError(f"signature.json: {exc}") from exc
    return Bundle(
        meta=meta_from_document(_load_json("meta.json", raw["meta.json"])),
        signature=sig,
        manifest=_manifest_from_doc(_load_json("manifest.json", raw["manifest.json"])),
        runner=runner,
        payload=raw["payload.bin"],
    )
