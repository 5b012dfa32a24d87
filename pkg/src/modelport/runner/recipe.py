"""Deterministic container build recipes for bundles.

Output is OCI-style build text derived purely from bundle content: identical
bundles yield byte-identical recipes.  Dependency pins are installed one per
directive in manifest order.  External bundles get their executor entry as the
container entrypoint; builtin bundles are served by the platform itself.
"""
from __future__ import annotations

import json

from .. import bundle as bundlemod
from ..errors import UnsupportedRuntimeError

_BASE_IMAGES = {
    "python": "docker.io/library/python:3.12-slim",
    "node": "docker.io/library/node:20-bookworm-slim",
}

_INSTALL_DIRECTIVES = {
    "python": "RUN pip install --no-cache-dir '{name}=={version}'",
    "node": "RUN npm install -g '{name}@{version}'",
}

_MODEL_DIR = "/srv/model"
_SERVE_PORT = 8080


def emit_container_recipe(b: bundlemod.Bundle) -> str:
    runtime = b.manifest.runtime.language_name
    if b.runner.executor_kind == "builtin":
        runtime = "python"  # builtins run under the platform itself
    base = _BASE_IMAGES.get(runtime)
    if base is None:
        raise UnsupportedRuntimeError(f"no container template for runtime {runtime!r}")

    lines = [
        f"# container recipe for bundle {bundlemod.digest(b)}",
        f"FROM {base}",
        f"WORKDIR {_MODEL_DIR}",
    ]
    for name in sorted(bundlemod.ENTRY_NAMES):
        lines.append(f"COPY {name} {_MODEL_DIR}/{name}")
    directive = _INSTALL_DIRECTIVES[runtime]
    for entry in b.manifest.entries:
        lines.append(directive.format(name=entry.name, version=entry.version))

    if b.runner.executor_kind == "builtin":
        lines.append(f"RUN pip install --no-cache-dir 'modelport=={_platform_version()}'")
        lines.append(f"EXPOSE {_SERVE_PORT}")
        entrypoint = ["modelport", "deploy", _MODEL_DIR, "--listen", f"0.0.0.0:{_SERVE_PORT}"]
    else:
        tokens = b.runner.entry.split()
        entrypoint = [
            t.replace("{payload}", f"{_MODEL_DIR}/payload.bin").replace("{workdir}", _MODEL_DIR)
            for t in tokens
        ]
    lines.append("ENTRYPOINT " + json.dumps(entrypoint))
    return "\n".join(lines) + "\n"


def _platform_version() -> str:
    from .. import __version__

    return __version__
