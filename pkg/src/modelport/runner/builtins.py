"""Builtin executors shipped with the platform.

A builtin is named by the runner entry, optionally with numeric parameters,
e.g. ``affine(a=2,b=3)``.  Handlers work on column-oriented payloads: every
input field is a parallel list and outputs are produced positionally.

    echo                copy input field i to output field i (field renaming)
    affine(a=..,b=..)   y = a*x + b elementwise over each input column
    threshold(t=..)     label 1 where value >= t else 0
    centroid            nearest centroid by squared distance; table in payload
    rules               first matching rule row-wise; rule table in payload
"""
from __future__ import annotations

import json
import re
import sys
from typing import Any, Callable

from .. import bundle as bundlemod
from .. import sigcore
from ..errors import ContractError, UnknownBuiltinError

Handler = Callable[[str, dict[str, Any]], dict[str, Any]]

_ENTRY_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\((.*)\))?\Z")


def parse_entry(entry: str) -> tuple[str, dict[str, float]]:
    """Split a builtin entry like ``affine(a=2,b=3)`` into name and parameters."""
    m = _ENTRY_RE.match(entry.strip())
    if not m:
        raise UnknownBuiltinError(f"malformed builtin entry {entry!r}")
    name, arglist = m.group(1), m.group(2)
    params: dict[str, float] = {}
    if arglist:
        for part in arglist.split(","):
            key, sep, value = part.partition("=")
            if not sep:
                raise UnknownBuiltinError(f"malformed parameter {part!r} in {entry!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise UnknownBuiltinError(f"parameter {key.strip()!r} must be numeric") from None
    return name, params


def _positional_pairs(sig: sigcore.Signature) -> dict[str, list[tuple[str, str]]]:
    """Per method: input field names zipped with output field names."""
    pairs = {}
    for m in sig.methods:
        if len(m.input.fields) != len(m.output.fields):
            raise ValueError(f"method {m.name}: input/output field counts differ")
        pairs[m.name] = list(zip(m.input.field_names(), m.output.field_names()))
    return pairs


def _make_echo(params: dict, sig: sigcore.Signature, payload: bytes) -> Handler:
    pairs = _positional_pairs(sig)

    def handle(method: str, message: dict[str, Any]) -> dict[str, Any]:
        return {out: message[inp] for inp, out in pairs[method]}

    return handle


def _make_affine(params: dict, sig: sigcore.Signature, payload: bytes) -> Handler:
    a = params.get("a", 1.0)
    b = params.get("b", 0.0)
    pairs = _positional_pairs(sig)

    def handle(method: str, message: dict[str, Any]) -> dict[str, Any]:
        return {out: [a * v + b for v in message[inp]] for inp, out in pairs[method]}

    return handle


def _make_threshold(params: dict, sig: sigcore.Signature, payload: bytes) -> Handler:
    t = params.get("t", 0.5)
    pairs = _positional_pairs(sig)

    def handle(method: str, message: dict[str, Any]) -> dict[str, Any]:
        return {out: [1 if v >= t else 0 for v in message[inp]] for inp, out in pairs[method]}

    return handle


def _make_centroid(params: dict, sig: sigcore.Signature, payload: bytes) -> Handler:
    table = json.loads(payload)
    classes: list[int] = table["classes"]
    centroids: list[list[float]] = table["centroids"]
    if len(classes) != len(centroids):
        raise ValueError("centroid table: classes and centroids differ in length")

    def handle(method: str, message: dict[str, Any]) -> dict[str, Any]:
        msig = next(m for m in sig.methods if m.name == method)
        columns = [message[name] for name in msig.input.field_names()]
        rows = list(zip(*columns))
        labels = []
        for row in rows:
            best, best_d = None, None
            for cls, center in zip(classes, centroids):
                d = sum((x - c) ** 2 for x, c in zip(row, center))
                if best_d is None or d < best_d:
                    best, best_d = cls, d
            labels.append(best)
        return {msig.output.fields[0].name: labels}

    return handle


def _make_rules(params: dict, sig: sigcore.Signature, payload: bytes) -> Handler:
    table = json.loads(payload)
    rules: list[dict] = table["rules"]
    default = table.get("default")

    def handle(method: str, message: dict[str, Any]) -> dict[str, Any]:
        msig = next(m for m in sig.methods if m.name == method)
        names = msig.input.field_names()
        count = len(message[names[0]]) if names else 0
        out_names = msig.output.field_names()
        out: dict[str, list] = {name: [] for name in out_names}
        for i in range(count):
            row = {name: message[name][i] for name in names}
            chosen = None
            for rule in rules:
                if all(row.get(k) == v for k, v in rule["when"].items()):
                    chosen = rule["then"]
                    break
            if chosen is None:
                chosen = default
            if chosen is None:
                raise ValueError(f"no rule matched row {i} and no default given")
            for name in out_names:
                out[name].append(chosen[name])
        return out

    return handle


BUILTINS: dict[str, Callable[[dict, sigcore.Signature, bytes], Handler]] = {
    "echo": _make_echo,
    "affine": _make_affine,
    "threshold": _make_threshold,
    "centroid": _make_centroid,
    "rules": _make_rules,
}

_DEFAULT_SIGNATURES: dict[str, Callable[[], sigcore.Signature]] = {
    "echo": lambda: sigcore.signature(
        predict=(
            sigcore.record(("x", sigcore.list_of(sigcore.F64))),
            sigcore.record(("y", sigcore.list_of(sigcore.F64))),
        )
    ),
    "affine": lambda: sigcore.signature(
        predict=(
            sigcore.record(("x", sigcore.list_of(sigcore.F64))),
            sigcore.record(("y", sigcore.list_of(sigcore.F64))),
        )
    ),
    "threshold": lambda: sigcore.signature(
        predict=(
            sigcore.record(("score", sigcore.list_of(sigcore.F64))),
            sigcore.record(("label", sigcore.list_of(sigcore.I64))),
        )
    ),
}


def builtin_bundle(
    entry: str,
    *,
    model_name: str,
    creator: str = "local",
    signature: sigcore.Signature | None = None,
    payload: bytes = b"",
    description: str = "",
    category: str = "",
    toolkit: str = "builtin",
) -> bundlemod.Bundle:
    """Assemble a bundle that runs one of the builtin executors."""
    name, _ = parse_entry(entry)
    if name not in BUILTINS:
        raise UnknownBuiltinError(f"no builtin named {name!r}")
    if signature is None:
        make_sig = _DEFAULT_SIGNATURES.get(name)
        if make_sig is None:
            raise ContractError(f"builtin {name!r} has no default signature; pass one")
        signature = make_sig()
    version = f"{sys.version_info.major}.{sys.version_info.minor}"
    return bundlemod.Bundle(
        meta=bundlemod.new_meta(
            model_name, creator, description=description, category=category, toolkit=toolkit
        ),
        signature=signature,
        manifest=bundlemod.DependencyManifest(runtime=bundlemod.RuntimeInfo("python", version)),
        runner=bundlemod.RunnerSpec("builtin", entry),
        payload=payload,
    )
