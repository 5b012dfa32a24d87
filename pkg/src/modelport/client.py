"""HTTP clients for the registry and for running instances."""
from __future__ import annotations

import json
import urllib.error
import urllib.parse
import urllib.request
from typing import Any

from .errors import ModelPortError, UnavailableError, raise_from_document

DEFAULT_TIMEOUT_S = 30.0


def _request(
    url: str,
    *,
    method: str = "GET",
    body: bytes | None = None,
    headers: dict[str, str] | None = None,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> bytes:
    req = urllib.request.Request(url, data=body, method=method, headers=headers or {})
    try:
        with urllib.request.urlopen(req, timeout=timeout_s) as resp:
            return resp.read()
    except urllib.error.HTTPError as exc:
        raw = exc.read()
        try:
            doc = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise ModelPortError(f"{method} {url}: HTTP {exc.code}") from exc
        raise_from_document(doc)
        raise ModelPortError(f"{method} {url}: HTTP {exc.code}") from exc
    except urllib.error.URLError as exc:
        raise UnavailableError(f"cannot reach {url}: {exc.reason}") from exc
    except TimeoutError as exc:
        raise UnavailableError(f"timed out reaching {url}") from exc


def _request_json(url: str, **kwargs: Any) -> Any:
    return json.loads(_request(url, **kwargs))


class RegistryClient:
    def __init__(self, base_url: str, token: str | None = None, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout_s = timeout_s

    def _headers(self, content_type: str | None = None) -> dict[str, str]:
        headers = {}
        if self.token:
            headers["X-Owner-Token"] = self.token
        if content_type:
            headers["Content-Type"] = content_type
        return headers

    def upload(self, archive: bytes) -> dict[str, Any]:
        return _request_json(
            f"{self.base_url}/v1/models",
            method="POST",
            body=archive,
            headers=self._headers("application/octet-stream"),
            timeout_s=self.timeout_s,
        )

    def publish(self, model_id: str, rev: int, description: str, category: str) -> dict[str, Any]:
        body = json.dumps({"description": description, "category": category}).encode("utf-8")
        return _request_json(
            f"{self.base_url}/v1/models/{model_id}/revisions/{rev}/publish",
            method="POST",
            body=body,
            headers=self._headers("application/json"),
            timeout_s=self.timeout_s,
        )

    def search(
        self,
        text: str = "",
        category: str | None = None,
        toolkit: str | None = None,
        limit: int | None = None,
        offset: int | None = None,
    ) -> dict[str, Any]:
        params = {"q": text}
        if category is not None:
            params["category"] = category
        if toolkit is not None:
            params["toolkit"] = toolkit
        if limit is not None:
            params["limit"] = str(limit)
        if offset is not None:
            params["offset"] = str(offset)
        query = urllib.parse.urlencode(params)
        return _request_json(
            f"{self.base_url}/v1/catalog?{query}",
            headers=self._headers(),
            timeout_s=self.timeout_s,
        )

    def get_metadata(self, model_id: str, rev: int | None = None) -> dict[str, Any]:
        path = f"/v1/models/{model_id}"
        if rev is not None:
            path += f"/revisions/{rev}"
        return _request_json(self.base_url + path, headers=self._headers(), timeout_s=self.timeout_s)

    def fetch_bundle(self, model_id: str, rev: int) -> bytes:
        return _request(
            f"{self.base_url}/v1/models/{model_id}/revisions/{rev}/bundle",
            headers=self._headers(),
            timeout_s=self.timeout_s,
        )


def fetch_signature(endpoint: str, timeout_s: float = 10.0) -> dict[str, Any]:
    """Live interface descriptor of a running instance."""
    return _request_json(f"{endpoint.rstrip('/')}/v1/signature", timeout_s=timeout_s)


def predict_remote(endpoint: str, method: str, payload: dict, timeout_s: float = 60.0) -> dict[str, Any]:
    body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
    return _request_json(
        f"{endpoint.rstrip('/')}/v1/predict/{method}",
        method="POST",
        body=body,
        headers={"Content-Type": "application/json"},
        timeout_s=timeout_s,
    )


def health_remote(endpoint: str, timeout_s: float = 10.0) -> dict[str, Any]:
    # an unhealthy instance answers 503 but still carries the report in the body
    url = f"{endpoint.rstrip('/')}/v1/health"
    try:
        with urllib.request.urlopen(url, timeout=timeout_s) as resp:
            return json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        doc = json.loads(exc.read())
        if "state" in doc:
            return doc
        raise_from_document(doc)
        raise
    except urllib.error.URLError as exc:
        raise UnavailableError(f"cannot reach {url}: {exc.reason}") from exc
