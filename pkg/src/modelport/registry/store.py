"""Durable model registry.

Layout under the data directory: ``blobs/<xx>/<digest>`` holds uploaded
archives content-addressed by their logical bundle digest, ``log.jsonl`` is an
append-only event log.  The in-memory index is rebuilt by replaying the log at
startup; every mutation is fsynced to the log before the caller sees a result,
so an uncleanly killed process loses nothing it acknowledged.

Principals are opaque bearer-token strings; a revision is visible to everyone
once published and only to its owner while private.
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .. import bundle as bundlemod
from .. import sigcore
from ..errors import (
    ConflictError,
    ContractError,
    ForbiddenError,
    NotFoundError,
    PayloadTooLargeError,
    StorageError,
    ValidationError,
)
from ..util import fsync_path, new_ulid, now_rfc3339

PRIVATE = "private"
PUBLISHED = "published"

MAX_SEARCH_LIMIT = 100
DEFAULT_SEARCH_LIMIT = 20


@dataclass(frozen=True)
class UploadResult:
    model_id: str
    rev: int
    digest: str
    duplicate: bool


@dataclass
class Revision:
    rev: int
    digest: str
    uploaded_at: str
    state: str
    meta: bundlemod.BundleMeta
    signature_doc: dict[str, Any]
    fingerprint: str
    published_at: str | None = None
    description: str | None = None  # publish-time override
    category: str | None = None


@dataclass
class ModelRecord:
    model_id: str
    owner: str
    name: str
    revisions: list[Revision] = field(default_factory=list)


@dataclass(frozen=True)
class CatalogEntry:
    model_id: str
    rev: int
    meta: bundlemod.BundleMeta
    publisher: str
    published_at: str


@dataclass(frozen=True)
class SearchQuery:
    text: str = ""
    category: str | None = None
    toolkit: str | None = None
    limit: int = DEFAULT_SEARCH_LIMIT
    offset: int = 0


def entry_doc(e: CatalogEntry) -> dict[str, Any]:
    return {
        "model_id": e.model_id,
        "rev": e.rev,
        "meta": bundlemod.meta_doc(e.meta),
        "publisher": e.publisher,
        "published_at": e.published_at,
    }


class RegistryStore:
    def __init__(self, data_dir: str | Path, payload_cap: int = bundlemod.DEFAULT_PAYLOAD_CAP):
        self.data_dir = Path(data_dir)
        self.payload_cap = payload_cap
        self.blob_dir = self.data_dir / "blobs"
        self.log_path = self.data_dir / "log.jsonl"
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._models: dict[str, ModelRecord] = {}
        self._lineage: dict[tuple[str, str], str] = {}
        self._catalog: dict[str, CatalogEntry] = {}
        self._replay()
        self._log = open(self.log_path, "ab")

    def close(self) -> None:
        with self._lock:
            if not self._log.closed:
                self._log.close()

    # -- log ------------------------------------------------------------------

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        data = self.log_path.read_bytes()
        lines = data.split(b"\n")
        # a partial trailing line is a crash artifact of an unacknowledged write
        tail_complete = data.endswith(b"\n")
        for i, line in enumerate(lines):
            if not line:
                continue
            last = i == len(lines) - 1
            try:
                event = json.loads(line)
            except json.JSONDecodeError as exc:
                if last and not tail_complete:
                    # drop the tail so later appends start on a clean line
                    with open(self.log_path, "r+b") as f:
                        f.truncate(len(data) - len(line))
                        f.flush()
                        os.fsync(f.fileno())
                    break
                raise StorageError(f"corrupt log line {i + 1}: {exc}") from exc
            self._apply(event, line_no=i + 1)

    def _apply(self, event: dict[str, Any], line_no: int) -> None:
        kind = event.get("event")
        if kind == "upload":
            model = self._models.get(event["model_id"])
            if model is None:
                model = ModelRecord(event["model_id"], event["owner"], event["meta"]["model_name"])
                self._models[model.model_id] = model
                self._lineage[(model.owner, model.name)] = model.model_id
            if event["rev"] != len(model.revisions) + 1:
                raise StorageError(f"log line {line_no}: revision gap for {model.model_id}")
            model.revisions.append(
                Revision(
                    rev=event["rev"],
                    digest=event["digest"],
                    uploaded_at=event["uploaded_at"],
                    state=PRIVATE,
                    meta=bundlemod.meta_from_document(event["meta"]),
                    signature_doc=event["signature"],
                    fingerprint=event["fingerprint"],
                )
            )
        elif kind == "publish":
            model = self._models.get(event["model_id"])
            if model is None or not 1 <= event["rev"] <= len(model.revisions):
                raise StorageError(f"log line {line_no}: publish of unknown revision")
            rev = model.revisions[event["rev"] - 1]
            rev.state = PUBLISHED
            rev.published_at = event["published_at"]
            rev.description = event["description"]
            rev.category = event["category"]
            self._catalog[model.model_id] = CatalogEntry(
                model_id=model.model_id,
                rev=rev.rev,
                meta=replace(rev.meta, description=event["description"], category=event["category"]),
                publisher=event["publisher"],
                published_at=event["published_at"],
            )
        else:
            raise StorageError(f"log line {line_no}: unknown event {kind!r}")

    def _append(self, event: dict[str, Any]) -> None:
        line = json.dumps(event, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
        self._log.write(line + b"\n")
        self._log.flush()
        os.fsync(self._log.fileno())

    # -- blobs ----------------------------------------------------------------

    def _blob_path(self, digest: str) -> Path:
        return self.blob_dir / digest[:2] / digest

    def _write_blob(self, digest: str, data: bytes) -> None:
        path = self._blob_path(digest)
        if path.exists():
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
        fsync_path(path.parent)

    # -- operations -----------------------------------------------------------

    def upload(self, archive: bytes, owner: str) -> UploadResult:
        if not owner:
            raise ContractError("owner required")
        b = bundlemod.unpack(archive, payload_cap=self.payload_cap)
        if len(b.payload) > self.payload_cap:
            raise PayloadTooLargeError(
                f"payload is {len(b.payload)} bytes, cap is {self.payload_cap}"
            )
        violations = bundlemod.validate(b, self.payload_cap)
        if violations:
            raise ValidationError("bundle does not validate", violations)
        digest = bundlemod.digest(b)
        self._write_blob(digest, archive)
        with self._lock:
            model_id = self._lineage.get((owner, b.meta.model_name))
            if model_id is None:
                model = ModelRecord(new_ulid(), owner, b.meta.model_name)
            else:
                model = self._models[model_id]
                for rev in model.revisions:
                    if rev.digest == digest:
                        return UploadResult(model.model_id, rev.rev, digest, duplicate=True)
            rev_number = len(model.revisions) + 1
            event = {
                "event": "upload",
                "model_id": model.model_id,
                "rev": rev_number,
                "digest": digest,
                "owner": owner,
                "uploaded_at": now_rfc3339(),
                "meta": bundlemod.meta_doc(b.meta),
                "signature": sigcore.to_document(b.signature),
                "fingerprint": sigcore.fingerprint(b.signature),
            }
            self._append(event)
            self._apply(event, line_no=-1)
            return UploadResult(model.model_id, rev_number, digest, duplicate=False)

    def publish(
        self, model_id: str, rev: int, description: str, category: str, publisher: str
    ) -> CatalogEntry:
        if not isinstance(description, str) or not description.strip():
            raise ValidationError("description must be non-empty")
        if not isinstance(category, str) or not category.strip():
            raise ValidationError("category must be non-empty")
        with self._lock:
            model, revision = self._resolve(model_id, rev, caller=publisher)
            if model.owner != publisher:
                raise ForbiddenError(f"{model_id} rev {rev} is not owned by this principal")
            if revision.state == PUBLISHED:
                raise ConflictError(f"{model_id} rev {rev} is already published")
            event = {
                "event": "publish",
                "model_id": model_id,
                "rev": rev,
                "publisher": publisher,
                "published_at": now_rfc3339(),
                "description": description,
                "category": category,
            }
            self._append(event)
            self._apply(event, line_no=-1)
            return self._catalog[model_id]

    def search(self, q: SearchQuery) -> tuple[int, list[CatalogEntry]]:
        if not 1 <= q.limit <= MAX_SEARCH_LIMIT:
            raise ValidationError(f"limit must be 1..{MAX_SEARCH_LIMIT}")
        if q.offset < 0:
            raise ValidationError("offset must be >= 0")
        needle = q.text.lower()
        with self._lock:
            hits = []
            for e in self._catalog.values():
                if needle and needle not in e.meta.model_name.lower() and needle not in e.meta.description.lower():
                    continue
                if q.category is not None and e.meta.category != q.category:
                    continue
                if q.toolkit is not None and e.meta.toolkit != q.toolkit:
                    continue
                hits.append(e)
        hits.sort(key=lambda e: e.model_id)
        hits.sort(key=lambda e: e.published_at, reverse=True)
        return len(hits), hits[q.offset : q.offset + q.limit]

    def _resolve(self, model_id: str, rev: int | None, caller: str | None) -> tuple[ModelRecord, Revision]:
        """Look up a revision enforcing visibility; rev None means latest visible."""
        model = self._models.get(model_id)
        if model is None:
            raise NotFoundError(f"model {model_id} not found")
        is_owner = caller is not None and caller == model.owner
        if rev is None:
            if is_owner:
                return model, model.revisions[-1]
            for revision in reversed(model.revisions):
                if revision.state == PUBLISHED:
                    return model, revision
            raise NotFoundError(f"model {model_id} has no published revision")
        if not 1 <= rev <= len(model.revisions):
            raise NotFoundError(f"model {model_id} has no revision {rev}")
        revision = model.revisions[rev - 1]
        if revision.state != PUBLISHED and not is_owner:
            raise ForbiddenError(f"{model_id} rev {rev} is private")
        return model, revision

    def get_metadata(self, model_id: str, rev: int | None = None, caller: str | None = None) -> dict[str, Any]:
        with self._lock:
            model, revision = self._resolve(model_id, rev, caller)
            doc = {
                "model_id": model.model_id,
                "model_name": model.name,
                "rev": revision.rev,
                "digest": revision.digest,
                "state": revision.state,
                "uploaded_at": revision.uploaded_at,
                "meta": bundlemod.meta_doc(revision.meta),
                "signature": revision.signature_doc,
                "fingerprint": revision.fingerprint,
            }
            if revision.state == PUBLISHED:
                doc["published_at"] = revision.published_at
                doc["description"] = revision.description
                doc["category"] = revision.category
            return doc

    def fetch_bundle(self, model_id: str, rev: int, caller: str | None = None) -> bytes:
        with self._lock:
            model, revision = self._resolve(model_id, rev, caller)
            digest = revision.digest
        path = self._blob_path(digest)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise StorageError(f"blob for {model_id} rev {rev} unreadable: {exc}") from exc
        try:
            actual = bundlemod.digest(bundlemod.unpack(data))
        except Exception as exc:
            raise StorageError(f"blob for {model_id} rev {rev} corrupt: {exc}") from exc
        if actual != digest:
            raise StorageError(f"blob for {model_id} rev {rev} does not match its digest")
        return data

    def audit(self) -> list[str]:
        """Full-scan check that stored blobs match indexed digests."""
        problems = []
        with self._lock:
            indexed = {
                rev.digest for model in self._models.values() for rev in model.revisions
            }
        for path in self.blob_dir.glob("*/*"):
            if path.suffix == ".tmp":
                continue
            try:
                actual = bundlemod.digest(bundlemod.unpack(path.read_bytes()))
            except Exception as exc:
                problems.append(f"{path.name}: unreadable ({exc})")
                continue
            if actual != path.name:
                problems.append(f"{path.name}: content digest is {actual}")
        for digest in indexed:
            if not self._blob_path(digest).exists():
                problems.append(f"{digest}: indexed but blob missing")
        return problems
