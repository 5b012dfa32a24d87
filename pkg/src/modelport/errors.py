"""Error taxonomy shared by the library, the HTTP services, and the CLI.

Every error carries a stable machine code plus the HTTP status used when it
crosses a service boundary.  ``error_document``/``raise_from_document`` convert
between exceptions and the wire form ``{"error_code", "message", "details"}``.
"""
from __future__ import annotations

from typing import Any


class ModelPortError(Exception):
    error_code = "internal_error"
    http_status = 500

    def details(self) -> dict[str, Any] | None:
        return None


class ParseError(ModelPortError):
    """Document is not decodable or does not have the required shape."""

    error_code = "parse_error"
    http_status = 400


class SchemaError(ModelPortError):
    """Document decodes but violates a structural rule."""

    error_code = "schema_error"
    http_status = 400


class ContractError(ModelPortError):
    """Operation precondition violated."""

    error_code = "contract_error"
    http_status = 400

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = violations or []

    def details(self) -> dict[str, Any] | None:
        return {"violations": self.violations} if self.violations else None


class CollisionError(ModelPortError):
    """Record merge would produce duplicate field names."""

    error_code = "collision"
    http_status = 400

    def __init__(self, duplicates: list[str]):
        super().__init__("duplicate field names: " + ", ".join(duplicates))
        self.duplicates = duplicates

    def details(self) -> dict[str, Any]:
        return {"duplicates": self.duplicates}


class ValidationError(ModelPortError):
    error_code = "validation_error"
    http_status = 400

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = violations or []

    def details(self) -> dict[str, Any]:
        return {"violations": self.violations}


class OutputValidationError(ValidationError):
    """Executor returned a payload that does not conform to the declared output."""

    error_code = "executor_output_invalid"
    http_status = 502


class ArchiveError(ModelPortError):
    error_code = "archive_error"
    http_status = 400


class VersionError(ModelPortError):
    error_code = "version_error"
    http_status = 400


class PayloadTooLargeError(ModelPortError):
    error_code = "payload_too_large"
    http_status = 413


class StorageError(ModelPortError):
    error_code = "storage_error"
    http_status = 500


class NotFoundError(ModelPortError):
    error_code = "not_found"
    http_status = 404


class ForbiddenError(ModelPortError):
    error_code = "forbidden"
    http_status = 403


class UnauthorizedError(ModelPortError):
    error_code = "unauthorized"
    http_status = 401


class ConflictError(ModelPortError):
    error_code = "conflict"
    http_status = 409


class UnknownBuiltinError(ModelPortError):
    error_code = "unknown_builtin"
    http_status = 400


class SpawnError(ModelPortError):
    error_code = "spawn_error"
    http_status = 500


class HandshakeError(ModelPortError):
    error_code = "handshake_error"
    http_status = 502


class PortError(ModelPortError):
    error_code = "port_error"
    http_status = 500


class MethodNotFoundError(ModelPortError):
    error_code = "method_not_found"
    http_status = 404


class ExecutorError(ModelPortError):
    """Executor answered a request with an error object."""

    error_code = "executor_error"
    http_status = 502

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.executor_message = message

    def details(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.executor_message}


class ProtocolError(ModelPortError):
    """Executor violated the line protocol."""

    error_code = "protocol_error"
    http_status = 502


class TimeoutError(ModelPortError):
    error_code = "timeout"
    http_status = 504


class UnavailableError(ModelPortError):
    error_code = "unavailable"
    http_status = 503


class BusyError(ModelPortError):
    error_code = "busy"
    http_status = 429


class UnsupportedRuntimeError(ModelPortError):
    error_code = "unsupported_runtime"
    http_status = 400


class BindError(ModelPortError):
    """Pipeline node endpoint unreachable or serving a different interface."""

    error_code = "bind_error"
    http_status = 502


class NodeError(ModelPortError):
    """A pipeline node failed during execution."""

    error_code = "node_error"
    http_status = 502

    def __init__(self, node_id: str, cause: Exception):
        super().__init__(f"node {node_id}: {cause}")
        self.node_id = node_id
        self.cause = cause

    def details(self) -> dict[str, Any]:
        return {"node": self.node_id, "cause": str(self.cause)}


def error_document(exc: Exception) -> dict[str, Any]:
    """Wire form of an error, a plain document with a stable code."""
    if isinstance(exc, ModelPortError):
        return {
            "error_code": exc.error_code,
            "message": str(exc),
            "details": exc.details() or {},
        }
    return {"error_code": "internal_error", "message": str(exc), "details": {}}


_CODE_TO_CLASS: dict[str, type[ModelPortError]] = {
    cls.error_code: cls
    for cls in list(globals().values())
    if isinstance(cls, type) and issubclass(cls, ModelPortError)
}


def raise_from_document(doc: dict[str, Any]) -> None:
    """Re-raise a wire error as the matching exception class."""
    code = doc.get("error_code", "internal_error")
    message = doc.get("message", "")
    details = doc.get("details") or {}
    cls = _CODE_TO_CLASS.get(code)
    if cls is None:
        raise ModelPortError(message)
    if issubclass(cls, ValidationError):
        raise cls(message, violations=list(details.get("violations", [])))
    if cls is ContractError:
        raise cls(message, violations=list(details.get("violations", [])))
    if cls is CollisionError:
        raise cls(list(details.get("duplicates", [])))
    if cls is ExecutorError:
        raise cls(details.get("code", "error"), details.get("message", message))
    if cls is NodeError:
        raise cls(details.get("node", "?"), ModelPortError(details.get("cause", message)))
    raise cls(message)
