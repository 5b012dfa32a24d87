"""Shared test fixtures: frozen golden values and bundle builders.

Golden constants were computed by independent oracles (hand-assembled
canonical strings piped through the sha256sum binary, class means over the
standard 150-row iris measurements) and frozen here.
"""
from __future__ import annotations

import json

from modelport import bundle, sigcore
from modelport.runner import builtin_bundle

# hand-assembled canonical descriptor text and its sha256sum
IRIS_CANONICAL = (
    '{"methods":[{"input":{"fields":[{"name":"sepal_length","type":{"item":{"kind":"scalar",'
    '"name":"f64"},"kind":"list"}},{"name":"sepal_width","type":{"item":{"kind":"scalar",'
    '"name":"f64"},"kind":"list"}},{"name":"petal_length","type":{"item":{"kind":"scalar",'
    '"name":"f64"},"kind":"list"}},{"name":"petal_width","type":{"item":{"kind":"scalar",'
    '"name":"f64"},"kind":"list"}}],"kind":"record"},"name":"classify","output":{"fields":'
    '[{"name":"IrisType","type":{"item":{"kind":"scalar","name":"i64"},"kind":"list"}}],'
    '"kind":"record"}}]}'
)
IRIS_FINGERPRINT = "e0a8d4c1e22f699f5bdd03c84c895a61637f98ae423ebe7809abda6f8e162fce"
AFFINE_FINGERPRINT = "ca9915eddb0aecb5d5cf23bba9c54fa32fc1cb6efe897494d22a2004765686aa"

# sha256sum over hand-concatenated entry names and contents of FIXED_BUNDLE
FIXED_BUNDLE_DIGEST = "998b5f11a711eaeea33492b64f95247d00583877302b97dd8ea0414cc3cc8dd0"

# per-class means of the 150-row iris table, full float precision
IRIS_CLASSES = [0, 1, 2]
IRIS_CENTROIDS = [
    [5.005999999999999, 3.428000000000001, 1.4620000000000002, 0.2459999999999999],
    [5.936, 2.7700000000000005, 4.26, 1.3259999999999998],
    [6.587999999999998, 2.9739999999999998, 5.552, 2.026],
]

IRIS_FEATURES = ("sepal_length", "sepal_width", "petal_length", "petal_width")


def iris_signature() -> sigcore.Signature:
    columns = [(name, sigcore.list_of(sigcore.F64)) for name in IRIS_FEATURES]
    return sigcore.signature(
        classify=(
            sigcore.record(*columns),
            sigcore.record(("IrisType", sigcore.list_of(sigcore.I64))),
        )
    )


def iris_centroid_bundle(model_name: str = "iris_model", creator: str = "tester") -> bundle.Bundle:
    payload = json.dumps({"classes": IRIS_CLASSES, "centroids": IRIS_CENTROIDS}).encode()
    return builtin_bundle(
        "centroid",
        model_name=model_name,
        creator=creator,
        signature=iris_signature(),
        payload=payload,
        description="nearest-centroid iris classifier",
        category="classification",
        toolkit="builtin",
    )


def affine_bundle(
    a: float = 2,
    b: float = 3,
    model_name: str = "affine_model",
    in_field: str = "x",
    out_field: str = "y",
    **meta,
) -> bundle.Bundle:
    sig = sigcore.signature(
        predict=(
            sigcore.record((in_field, sigcore.list_of(sigcore.F64))),
            sigcore.record((out_field, sigcore.list_of(sigcore.F64))),
        )
    )
    entry = f"affine(a={a},b={b})"
    return builtin_bundle(entry, model_name=model_name, signature=sig, **meta)


def echo_bundle(model_name: str, in_fields, out_fields, item=None, **meta) -> bundle.Bundle:
    item = item or sigcore.list_of(sigcore.F64)
    sig = sigcore.signature(
        predict=(
            sigcore.record(*[(n, item) for n in in_fields]),
            sigcore.record(*[(n, item) for n in out_fields]),
        )
    )
    return builtin_bundle("echo", model_name=model_name, signature=sig, **meta)


def fixed_bundle() -> bundle.Bundle:
    """The bundle whose digest is frozen as FIXED_BUNDLE_DIGEST."""
    return bundle.Bundle(
        meta=bundle.BundleMeta(
            model_name="affine_fixed",
            creator="alice",
            created_at="2026-01-02T03:04:05.000000Z",
            description="d",
            category="c",
            toolkit="t",
        ),
        signature=sigcore.signature(
            predict=(
                sigcore.record(("x", sigcore.list_of(sigcore.F64))),
                sigcore.record(("y", sigcore.list_of(sigcore.F64))),
            )
        ),
        manifest=bundle.DependencyManifest(
            entries=(bundle.DependencyEntry("numpy", "1.26.4"),),
            runtime=bundle.RuntimeInfo("python", "3.10"),
        ),
        runner=bundle.RunnerSpec("builtin", "affine(a=2,b=3)"),
        payload=b"hello payload",
    )


def process_alive(pid: int) -> bool:
    """True while the pid exists and is not a zombie."""
    try:
        with open(f"/proc/{pid}/stat") as f:
            fields = f.read().rsplit(")", 1)[-1].split()
    except OSError:
        return False
    return fields[0] != "Z"


def wait_gone(pid: int, timeout_s: float = 5.0) -> bool:
    import time

    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        if not process_alive(pid):
            return True
        time.sleep(0.02)
    return not process_alive(pid)
