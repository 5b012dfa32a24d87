"""HTTP face of the registry.

Routes::

    POST /v1/models                                   upload archive (octet-stream)
    POST /v1/models/{id}/revisions/{rev}/publish      {"description", "category"}
    GET  /v1/catalog?q=&category=&toolkit=&limit=&offset=
    GET  /v1/models/{id}                              latest visible metadata
    GET  /v1/models/{id}/revisions/{rev}              revision metadata
    GET  /v1/models/{id}/revisions/{rev}/bundle       archive bytes

Errors travel as ``{"error_code", "message", "details"}``.  The principal is
the opaque value of the ``X-Owner-Token`` header.
"""
from __future__ import annotations

import re
from urllib.parse import parse_qs, urlsplit

from .. import httpkit
from ..errors import NotFoundError, ParseError, UnauthorizedError, ValidationError
from .store import DEFAULT_SEARCH_LIMIT, RegistryStore, SearchQuery, entry_doc

_MODEL = re.compile(r"/v1/models/([^/]+)\Z")
_REVISION = re.compile(r"/v1/models/([^/]+)/revisions/(\d+)\Z")
_REV_BUNDLE = re.compile(r"/v1/models/([^/]+)/revisions/(\d+)/bundle\Z")
_REV_PUBLISH = re.compile(r"/v1/models/([^/]+)/revisions/(\d+)/publish\Z")

_BODY_SLACK = 64 * 1024 * 1024


class _RegistryHandler(httpkit.Handler):
    @property
    def store(self) -> RegistryStore:
        return self.server.context  # type: ignore[attr-defined]

    def _token(self, required: bool = False) -> str | None:
        token = self.headers.get("X-Owner-Token")
        if required and not token:
            raise UnauthorizedError("X-Owner-Token header required")
        return token or None

    def do_POST(self) -> None:
        try:
            path = urlsplit(self.path).path
            if path == "/v1/models":
                archive = self.read_body(self.store.payload_cap + _BODY_SLACK)
                result = self.store.upload(archive, owner=self._token(required=True))
                self.send_json(
                    201,
                    {
                        "model_id": result.model_id,
                        "rev": result.rev,
                        "digest": result.digest,
                        "duplicate": result.duplicate,
                    },
                )
                return
            m = _REV_PUBLISH.match(path)
            if m:
                token = self._token(required=True)
                doc = httpkit.loads_strict(self.read_body(1 << 20))
                if not isinstance(doc, dict):
                    raise ParseError("publish body must be an object")
                entry = self.store.publish(
                    m.group(1),
                    int(m.group(2)),
                    description=doc.get("description", ""),
                    category=doc.get("category", ""),
                    publisher=token,
                )
                self.send_json(200, entry_doc(entry))
                return
            raise NotFoundError(f"no such route: POST {path}")
        except Exception as exc:
            self.send_error_doc(exc)

    def do_GET(self) -> None:
        try:
            split = urlsplit(self.path)
            path = split.path
            if path == "/v1/catalog":
                total, entries = self.store.search(_parse_query(split.query))
                self.send_json(200, {"total": total, "entries": [entry_doc(e) for e in entries]})
                return
            m = _REV_BUNDLE.match(path)
            if m:
                data = self.store.fetch_bundle(m.group(1), int(m.group(2)), caller=self._token())
                self.send_octets(200, data)
                return
            m = _REVISION.match(path)
            if m:
                doc = self.store.get_metadata(m.group(1), int(m.group(2)), caller=self._token())
                self.send_json(200, doc)
                return
            m = _MODEL.match(path)
            if m:
                doc = self.store.get_metadata(m.group(1), caller=self._token())
                self.send_json(200, doc)
                return
            raise NotFoundError(f"no such route: GET {path}")
        except Exception as exc:
            self.send_error_doc(exc)


def _parse_query(raw: str) -> SearchQuery:
    params = parse_qs(raw, keep_blank_values=True)

    def single(name: str) -> str | None:
        values = params.get(name)
        return values[-1] if values else None

    def integer(name: str, default: int) -> int:
        value = single(name)
        if value is None or value == "":
            return default
        try:
            return int(value)
        except ValueError:
            raise ValidationError(f"{name} must be an integer") from None

    return SearchQuery(
        text=single("q") or "",
        category=single("category"),
        toolkit=single("toolkit"),
        limit=integer("limit", DEFAULT_SEARCH_LIMIT),
        offset=integer("offset", 0),
    )


class RegistryService:
    """Registry store behind a threaded HTTP server."""

    def __init__(self, data_dir, listen: str = "127.0.0.1:0", payload_cap: int | None = None):
        kwargs = {} if payload_cap is None else {"payload_cap": payload_cap}
        self.store = RegistryStore(data_dir, **kwargs)
        self._http = httpkit.HttpService(_RegistryHandler, listen, context=self.store)

    @property
    def endpoint(self) -> str:
        return self._http.endpoint

    def start(self) -> "RegistryService":
        self._http.start()
        return self

    def stop(self) -> None:
        self._http.stop()
        self.store.close()
