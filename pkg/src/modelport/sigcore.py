"""Typed model interfaces: the data-type algebra, descriptor documents,
canonical encoding, fingerprints, compatibility checks, and message validation.

A descriptor document looks like::

    {"methods": [{"name": "classify", "input": T, "output": T}]}

where ``T`` is one of ``{"kind": "scalar", "name": "f64"}``,
``{"kind": "list", "item": T}``, or
``{"kind": "record", "fields": [{"name": ..., "type": T}]}``.

Messages are column oriented: a record value is an object whose fields hold
parallel values, ``bytes`` travel as base64 strings.
"""
from __future__ import annotations

import base64
import binascii
import json
import math
import re
from dataclasses import dataclass
from typing import Any, Union

from .errors import CollisionError, ContractError, ParseError, SchemaError
from .util import canonical_bytes, sha256_hex

SCALAR_KINDS = ("i64", "f64", "bool", "string", "bytes")
IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]{0,63}\Z")
MAX_DEPTH = 16
_I64_MIN = -(2**63)
_I64_MAX = 2**63 - 1

DataType = Union["Scalar", "ListOf", "Record"]


def _check_ident(name: Any, what: str) -> None:
    if not isinstance(name, str) or not IDENT_RE.match(name):
        raise SchemaError(f"{what} {name!r} is not a valid identifier")


@dataclass(frozen=True)
class Scalar:
    name: str

    def __post_init__(self):
        if self.name not in SCALAR_KINDS:
            raise SchemaError(f"unknown scalar {self.name!r}")

    @property
    def depth(self) -> int:
        return 1


@dataclass(frozen=True)
class ListOf:
    item: DataType

    def __post_init__(self):
        if not isinstance(self.item, (Scalar, ListOf, Record)):
            raise SchemaError("list item must be a data type")
        if self.depth > MAX_DEPTH:
            raise SchemaError(f"nesting depth exceeds {MAX_DEPTH}")

    @property
    def depth(self) -> int:
        return 1 + self.item.depth


@dataclass(frozen=True)
class Field:
    name: str
    type: DataType

    def __post_init__(self):
        _check_ident(self.name, "field name")
        if not isinstance(self.type, (Scalar, ListOf, Record)):
            raise SchemaError("field type must be a data type")


@dataclass(frozen=True)
class Record:
    fields: tuple[Field, ...]

    def __post_init__(self):
        if not self.fields:
            raise SchemaError("record must declare at least one field")
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError("duplicate field names: " + ", ".join(dupes))
        if self.depth > MAX_DEPTH:
            raise SchemaError(f"nesting depth exceeds {MAX_DEPTH}")

    @property
    def depth(self) -> int:
        return 1 + max(f.type.depth for f in self.fields)

    def field_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields)

    def field_type(self, name: str) -> DataType | None:
        for f in self.fields:
            if f.name == name:
                return f.type
        return None


I64 = Scalar("i64")
F64 = Scalar("f64")
BOOL = Scalar("bool")
STRING = Scalar("string")
BYTES = Scalar("bytes")


def list_of(item: DataType) -> ListOf:
    return ListOf(item)


def record(*fields: tuple[str, DataType]) -> Record:
    return Record(tuple(Field(name, t) for name, t in fields))


@dataclass(frozen=True)
class MethodSig:
    name: str
    input: Record
    output: Record

    def __post_init__(self):
        _check_ident(self.name, "method name")
        if not isinstance(self.input, Record) or not isinstance(self.output, Record):
            raise SchemaError(f"method {self.name!r}: input and output must be records")


@dataclass(frozen=True)
class Signature:
    methods: tuple[MethodSig, ...]

    def __post_init__(self):
        if not self.methods:
            raise SchemaError("signature must declare at least one method")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate method names")

    def method(self, name: str) -> MethodSig | None:
        for m in self.methods:
            if m.name == name:
                return m
        return None

    def method_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.methods)


def signature(**methods: tuple[Record, Record]) -> Signature:
    """Shorthand: ``signature(predict=(in_record, out_record))``."""
    return Signature(
        tuple(MethodSig(name, inp, out) for name, (inp, out) in methods.items())
    )


# -- document form -----------------------------------------------------------


def type_to_document(t: DataType) -> dict[str, Any]:
    if isinstance(t, Scalar):
        return {"kind": "scalar", "name": t.name}
    if isinstance(t, ListOf):
        return {"kind": "list", "item": type_to_document(t.item)}
    if isinstance(t, Record):
        return {
            "kind": "record",
            "fields": [{"name": f.name, "type": type_to_document(f.type)} for f in t.fields],
        }
    raise ContractError(f"not a data type: {t!r}")


def _require_keys(doc: dict, keys: set[str], what: str) -> None:
    if set(doc) != keys:
        raise ParseError(f"{what} must have exactly the keys {sorted(keys)}")


def type_from_document(doc: Any) -> DataType:
    if not isinstance(doc, dict) or not isinstance(doc.get("kind"), str):
        raise ParseError("type node must be an object with a 'kind'")
    kind = doc["kind"]
    if kind == "scalar":
        _require_keys(doc, {"kind", "name"}, "scalar node")
        if not isinstance(doc["name"], str):
            raise ParseError("scalar name must be a string")
        return Scalar(doc["name"])
    if kind == "list":
        _require_keys(doc, {"kind", "item"}, "list node")
        return ListOf(type_from_document(doc["item"]))
    if kind == "record":
        _require_keys(doc, {"kind", "fields"}, "record node")
        if not isinstance(doc["fields"], list):
            raise ParseError("record fields must be a list")
        fields = []
        for f in doc["fields"]:
            if not isinstance(f, dict):
                raise ParseError("record field must be an object")
            _require_keys(f, {"name", "type"}, "record field")
            if not isinstance(f["name"], str):
                raise ParseError("field name must be a string")
            fields.append(Field(f["name"], type_from_document(f["type"])))
        return Record(tuple(fields))
    raise ParseError(f"unknown type kind {kind!r}")


def to_document(sig: Signature) -> dict[str, Any]:
    return {
        "methods": [
            {
                "name": m.name,
                "input": type_to_document(m.input),
                "output": type_to_document(m.output),
            }
            for m in sig.methods
        ]
    }


def from_document(doc: Any) -> Signature:
    if not isinstance(doc, dict):
        raise ParseError("descriptor must be an object")
    _require_keys(doc, {"methods"}, "descriptor")
    if not isinstance(doc["methods"], list):
        raise ParseError("'methods' must be a list")
    methods = []
    for m in doc["methods"]:
        if not isinstance(m, dict):
            raise ParseError("method entry must be an object")
        _require_keys(m, {"name", "input", "output"}, "method entry")
        if not isinstance(m["name"], str):
            raise ParseError("method name must be a string")
        inp = type_from_document(m["input"])
        out = type_from_document(m["output"])
        if not isinstance(inp, Record) or not isinstance(out, Record):
            raise SchemaError(f"method {m['name']!r}: input and output must be records")
        methods.append(MethodSig(m["name"], inp, out))
    return Signature(tuple(methods))


def parse_descriptor(text: str | bytes) -> Signature:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"descriptor is not valid JSON: {exc}") from exc
    return from_document(doc)


def render_descriptor(sig: Signature, *, indent: int | None = None) -> str:
    return json.dumps(to_document(sig), indent=indent, sort_keys=True, ensure_ascii=False)


def canonicalize(sig: Signature) -> bytes:
    return canonical_bytes(to_document(sig))


def fingerprint(sig: Signature) -> str:
    return sha256_hex(canonicalize(sig))


# -- compatibility -----------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    field: str
    reason: str  # "missing" | "extra" | "type_mismatch"


@dataclass(frozen=True)
class CompatibilityReport:
    compatible: bool
    mismatches: tuple[Mismatch, ...]


def check_compatibility(upstream_output: Record, downstream_input: Record) -> CompatibilityReport:
    """Exact structural match: same field names, identical types, no coercion."""
    if not isinstance(upstream_output, Record) or not isinstance(downstream_input, Record):
        raise ContractError("compatibility is defined between two records")
    up = {f.name: f.type for f in upstream_output.fields}
    mismatches = []
    for f in downstream_input.fields:
        if f.name not in up:
            mismatches.append(Mismatch(f.name, "missing"))
        elif up[f.name] != f.type:
            mismatches.append(Mismatch(f.name, "type_mismatch"))
    declared = set(downstream_input.field_names())
    for f in upstream_output.fields:
        if f.name not in declared:
            mismatches.append(Mismatch(f.name, "extra"))
    return CompatibilityReport(not mismatches, tuple(mismatches))


def merge_records(a: Record, b: Record) -> Record:
    """Concatenate field lists, a's first; duplicate names are a collision."""
    if not isinstance(a, Record) or not isinstance(b, Record):
        raise ContractError("merge is defined between two records")
    b_names = set(b.field_names())
    duplicates = [f.name for f in a.fields if f.name in b_names]
    if duplicates:
        raise CollisionError(duplicates)
    return Record(a.fields + b.fields)


# -- message validation ------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def _typename(value: Any) -> str:
    return {bool: "bool", int: "integer", float: "number", str: "string"}.get(
        type(value), type(value).__name__
    )


def validate_message(value: Any, declared: DataType, path: str = "$") -> list[Violation]:
    """Check a decoded message against a declared type; returns violations, raises nothing."""
    out: list[Violation] = []
    _validate(value, declared, path, out)
    return out


def _validate(value: Any, declared: DataType, path: str, out: list[Violation]) -> None:
    if isinstance(declared, Scalar):
        _validate_scalar(value, declared.name, path, out)
    elif isinstance(declared, ListOf):
        if not isinstance(value, list):
            out.append(Violation(path, f"expected list, got {_typename(value)}"))
            return
        for i, item in enumerate(value):
            _validate(item, declared.item, f"{path}[{i}]", out)
    elif isinstance(declared, Record):
        if not isinstance(value, dict):
            out.append(Violation(path, f"expected object, got {_typename(value)}"))
            return
        declared_names = set(declared.field_names())
        for f in declared.fields:
            if f.name not in value:
                out.append(Violation(f"{path}.{f.name}", "missing field"))
            else:
                _validate(value[f.name], f.type, f"{path}.{f.name}", out)
        for name in value:
            if not isinstance(name, str) or name not in declared_names:
                out.append(Violation(f"{path}.{name}", "undeclared field"))
    else:
        raise ContractError(f"not a data type: {declared!r}")


def _validate_scalar(value: Any, kind: str, path: str, out: list[Violation]) -> None:
    if kind == "i64":
        if type(value) is not int:
            out.append(Violation(path, f"expected i64, got {_typename(value)}"))
        elif not _I64_MIN <= value <= _I64_MAX:
            out.append(Violation(path, "integer out of 64-bit range"))
    elif kind == "f64":
        if type(value) not in (int, float):
            out.append(Violation(path, f"expected f64, got {_typename(value)}"))
        elif isinstance(value, float) and not math.isfinite(value):
            out.append(Violation(path, "number must be finite"))
    elif kind == "bool":
        if type(value) is not bool:
            out.append(Violation(path, f"expected bool, got {_typename(value)}"))
    elif kind == "string":
        if not isinstance(value, str):
            out.append(Violation(path, f"expected string, got {_typename(value)}"))
    elif kind == "bytes":
        if not isinstance(value, str):
            out.append(Violation(path, f"expected base64 string, got {_typename(value)}"))
        else:
            try:
                base64.b64decode(value, validate=True)
            except (binascii.Error, ValueError):
                out.append(Violation(path, "invalid base64"))
