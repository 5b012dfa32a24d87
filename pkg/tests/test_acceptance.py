"""End-to-end acceptance gate.

One test per acceptance criterion; the conftest hook prints a PASS/FAIL
line for each at the end of the run. Every criterion that touches a
model executor runs against builtin executors, except the final
cross-language interop test, which exercises the Node adapter and skips
when that package has not been built.
"""
from __future__ import annotations

import io
import json
import os
import random
import shutil
import signal
import subprocess
import time
import zipfile
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings

from modelport import bundle, composer, errors, sigcore
from modelport.client import RegistryClient
from modelport.registry.store import RegistryStore, SearchQuery, entry_doc
from modelport.runner import materialize, spawn

from helpers import (
    FIXED_BUNDLE_DIGEST,
    IRIS_CANONICAL,
    IRIS_FEATURES,
    IRIS_FINGERPRINT,
    affine_bundle,
    echo_bundle,
    fixed_bundle,
    iris_signature,
    wait_gone,
)
from oracles import oracle_search
from strategies import signatures
from test_cli import one_json_doc, run_cli, start_cli, stop_cli
from test_runner import STUB_BAD_OUTPUT, STUB_SILENT, STUB_WRONG_FINGERPRINT, spawn_stub, stub_pid

ADAPTER_ROOT = Path(__file__).resolve().parent.parent / "adapter"
ADAPTER_CLI = ADAPTER_ROOT / "dist" / "cli.js"


def sha256sum_binary(data: bytes) -> str:
    """Hash via the external sha256sum utility, not hashlib."""
    result = subprocess.run(["sha256sum"], input=data, capture_output=True, check=True)
    return result.stdout.split()[0].decode()


def machine_doc(result):
    assert result.returncode == 0, result.stderr
    return one_json_doc(result.stdout)


# -- criterion: full lifecycle through the command line in under ten seconds --------


def test_lifecycle_push_publish_search_pull_deploy_predict(tmp_path):
    started = time.monotonic()
    base = ["--output", "machine"]

    serve = start_cli(
        base + ["--data-dir", str(tmp_path / "reg"), "serve", "--listen", "127.0.0.1:0"],
        home=tmp_path,
    )
    deploy = None
    try:
        serving = json.loads(serve.stdout.readline())
        assert serving["event"] == "serving"
        remote = base + ["--registry", serving["endpoint"], "--token", "alice"]

        bundle_file = tmp_path / "affine.zip"
        bundle_file.write_bytes(bundle.pack(affine_bundle(2, 3)))
        pushed = machine_doc(run_cli(remote + ["push", str(bundle_file)], home=tmp_path))
        assert pushed["rev"] == 1 and pushed["duplicate"] is False

        published = run_cli(
            remote
            + ["publish", pushed["model_id"], "1", "--description", "line fit", "--category", "regression"],
            home=tmp_path,
        )
        assert published.returncode == 0, published.stderr

        listing = machine_doc(run_cli(remote + ["search", "affine"], home=tmp_path))
        assert listing["total"] == 1
        assert listing["entries"][0]["model_id"] == pushed["model_id"]

        pulled = run_cli(
            remote + ["pull", pushed["model_id"], "1"], home=tmp_path, cwd=tmp_path
        )
        assert pulled.returncode == 0, pulled.stderr
        archive = tmp_path / f"{pushed['model_id']}_r1.zip"
        assert bundle.digest(bundle.unpack(archive.read_bytes())) == pushed["digest"]

        deploy = start_cli(
            base + ["deploy", str(archive), "--listen", "127.0.0.1:0"], home=tmp_path
        )
        endpoint = json.loads(deploy.stdout.readline())["endpoint"]
        predicted = run_cli(
            base + ["predict", endpoint, "predict", "-"],
            home=tmp_path,
            stdin_data='{"x": [1.0, 2.0]}',
        )
        assert machine_doc(predicted) == {"y": [5.0, 7.0]}
    finally:
        if deploy is not None:
            stop_cli(deploy)
        stop_cli(serve)
    assert time.monotonic() - started < 10.0


# -- criterion: pipelines equal local composition; fan-out/join plans and runs ------


def _deploy(tmp_path, instances, b, name):
    inst = spawn(materialize(bundle.pack(b), tmp_path / name))
    instances.append(inst)
    return inst


def _graph(nodes, edges):
    doc = {
        "source": {
            "kind": "record",
            "fields": [
                {"name": "x", "type": {"kind": "list", "item": {"kind": "scalar", "name": "f64"}}}
            ],
        },
        "nodes": [{"id": i, "endpoint": e, "method": "predict"} for i, e in nodes],
        "edges": [{"from": a, "to": b} for a, b in edges],
    }
    return composer.load_graph(json.dumps(doc))


def test_pipeline_equals_local_composition_and_fan_out_join(tmp_path, instances):
    started = time.monotonic()
    double = _deploy(tmp_path, instances, affine_bundle(2, 3, "stage_double", "x", "mid"), "d")
    shift = _deploy(tmp_path, instances, affine_bundle(1, -3, "stage_shift", "mid", "y"), "s")

    chain = composer.plan(
        _graph(
            [("double", double.endpoint), ("shift", shift.endpoint)],
            [("SOURCE", "double"), ("double", "shift"), ("shift", "SINK")],
        )
    )
    rng = random.Random(4)
    seen = 0
    for _ in range(10):
        xs = [float(rng.randint(-10**6, 10**6)) for _ in range(10)]
        envelope = composer.execute(chain, {"x": xs})
        # (2x + 3) - 3 collapses to 2x, exactly, for integral values
        assert envelope["output"] == {"y": [2.0 * x for x in xs]}
        seen += len(xs)
    assert seen == 100

    branch_u = _deploy(tmp_path, instances, affine_bundle(1, 0, "branch_u", "x", "u"), "u")
    branch_v = _deploy(tmp_path, instances, affine_bundle(10, 0, "branch_v", "x", "v"), "v")
    join = _deploy(tmp_path, instances, echo_bundle("join_model", ["u", "v"], ["p", "q"]), "j")

    fan = _graph(
        [("branch_u", branch_u.endpoint), ("branch_v", branch_v.endpoint), ("join", join.endpoint)],
        [
            ("SOURCE", "branch_u"),
            ("SOURCE", "branch_v"),
            ("branch_u", "join"),
            ("branch_v", "join"),
            ("join", "SINK"),
            ("branch_u", "SINK"),
            ("branch_v", "SINK"),
        ],
    )
    assert composer.validate_graph(fan) == []
    plan = composer.plan(fan)
    assert plan.stages == (("branch_u", "branch_v"), ("join",))
    envelope = composer.execute(plan, {"x": [2.0, 3.0]})
    assert envelope["output"] == {
        "p": [2.0, 3.0],
        "q": [20.0, 30.0],
        "u": [2.0, 3.0],
        "v": [20.0, 30.0],
    }

    # two bindings producing the same field into SINK must be rejected up front
    collision = _graph(
        [("left", branch_u.endpoint), ("right", branch_u.endpoint)],
        [("SOURCE", "left"), ("SOURCE", "right"), ("left", "SINK"), ("right", "SINK")],
    )
    violations = composer.validate_graph(collision)
    assert any("merge collision" in v for v in violations)
    with pytest.raises(errors.ContractError):
        composer.plan(collision)
    assert time.monotonic() - started < 20.0


# -- criterion: canonicalization and fingerprint properties over 500 signatures -----


@settings(
    max_examples=500,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
@given(a=signatures(), b=signatures())
def test_fingerprint_canonicalization_properties(a, b):
    text = sigcore.render_descriptor(a)
    assert sigcore.parse_descriptor(text) == a
    canonical = sigcore.canonicalize(a)
    assert sigcore.canonicalize(sigcore.parse_descriptor(canonical.decode())) == canonical
    same_print = sigcore.fingerprint(a) == sigcore.fingerprint(b)
    assert same_print == (canonical == sigcore.canonicalize(b))


def test_golden_fingerprint_matches_external_hash_utility():
    canonical = sigcore.canonicalize(iris_signature())
    assert canonical == IRIS_CANONICAL.encode()
    assert sha256sum_binary(canonical) == IRIS_FINGERPRINT
    assert sigcore.fingerprint(iris_signature()) == IRIS_FINGERPRINT


# -- criterion: bundle digest ignores archive layout, tracks content -----------------


def _rearchive(archive: bytes, seed: int) -> bytes:
    src = zipfile.ZipFile(io.BytesIO(archive))
    entries = [(name, src.read(name)) for name in src.namelist()]
    random.Random(seed).shuffle(entries)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as z:
        for name, content in entries:
            z.writestr(zipfile.ZipInfo(name, date_time=(2024, 6, 1, 12, 0, 0)), content)
    return buf.getvalue()


def test_bundle_digest_deterministic_across_rearchiving(tmp_path):
    original = bundle.pack(fixed_bundle())
    want = bundle.digest(bundle.unpack(original))
    assert want == FIXED_BUNDLE_DIGEST

    for seed in range(5):
        shuffled = _rearchive(original, seed)
        assert shuffled != original
        assert bundle.digest(bundle.unpack(shuffled)) == want

    mutated = fixed_bundle()
    payload = bytearray(mutated.payload)
    payload[0] ^= 1
    mutated = bundle.Bundle(
        meta=mutated.meta,
        signature=mutated.signature,
        manifest=mutated.manifest,
        runner=mutated.runner,
        payload=bytes(payload),
    )
    assert bundle.digest(mutated) != want

    # external oracle: concatenate name NUL content NUL in sorted order, sha256sum it
    src = zipfile.ZipFile(io.BytesIO(original))
    blob = b"".join(
        name.encode() + b"\0" + src.read(name) + b"\0" for name in sorted(src.namelist())
    )
    assert sha256sum_binary(blob) == want


# -- criterion: registry survives kill -9 and never leaks private revisions ---------


def test_registry_survives_kill_and_replays_upload(tmp_path):
    data_dir = tmp_path / "reg"
    serve = start_cli(
        ["--output", "machine", "--data-dir", str(data_dir), "serve", "--listen", "127.0.0.1:0"],
        home=tmp_path,
    )
    serving = json.loads(serve.stdout.readline())
    up = RegistryClient(serving["endpoint"], token="alice").upload(bundle.pack(affine_bundle()))
    os.kill(serve.pid, signal.SIGKILL)
    serve.wait(timeout=10)

    after = start_cli(
        ["--output", "machine", "--data-dir", str(data_dir), "serve", "--listen", "127.0.0.1:0"],
        home=tmp_path,
    )
    try:
        endpoint = json.loads(after.stdout.readline())["endpoint"]
        fetched = RegistryClient(endpoint, token="alice").fetch_bundle(up["model_id"], up["rev"])
        assert bundle.digest(bundle.unpack(fetched)) == up["digest"]
    finally:
        stop_cli(after)


def test_thousand_random_searches_match_oracle_and_respect_privacy(tmp_path):
    store = RegistryStore(tmp_path / "store")
    rng = random.Random(97)
    owners = ["alice", "bob", "carol"]
    words = ["iris", "spam", "fraud", "churn", "line", "tone"]
    cats = ["vision", "text", "tabular"]
    kits = ["sklearn", "torch", ""]

    published: set[tuple[str, int]] = set()
    private: set[tuple[str, int]] = set()
    for i in range(36):
        owner = rng.choice(owners)
        name = f"model_{rng.choice(words)}_{i}"
        b = echo_bundle(name, ["a"], ["b"], toolkit=rng.choice(kits), creator=owner)
        up = store.upload(bundle.pack(b), owner)
        revs = 1
        if rng.random() < 0.3:
            follow_up = store.upload(bundle.pack(affine_bundle(i + 1, 0, name)), owner)
            assert follow_up.model_id == up.model_id
            revs = follow_up.rev
        for rev in range(1, revs + 1):
            if rng.random() < 0.65:
                store.publish(
                    up.model_id, rev,
                    f"{rng.choice(words)} detector number {i}", rng.choice(cats), owner,
                )
                published.add((up.model_id, rev))
            else:
                private.add((up.model_id, rev))

    # the full listing must be exactly the newest published revision per model
    total, everything = store.search(SearchQuery(limit=100))
    got = {(e.model_id, e.rev) for e in everything}
    newest = {}
    for model_id, rev in published:
        newest[model_id] = max(newest.get(model_id, 0), rev)
    assert got == {(m, r) for m, r in newest.items()}
    assert total == len(newest)
    assert got.isdisjoint(private)

    catalog_docs = [entry_doc(e) for e in everything]
    texts = ["", "iris", "IRIS", "spam", "model", "detector", "zz", "ne", "_1"]
    for _ in range(1000):
        text = rng.choice(texts)
        category = rng.choice([None, *cats, "nope"])
        toolkit = rng.choice([None, *kits, "nope"])
        limit = rng.choice([1, 3, 5, 20, 100])
        offset = rng.choice([0, 1, 2, 7, 40])
        total, page = store.search(
            SearchQuery(text=text, category=category, toolkit=toolkit, limit=limit, offset=offset)
        )
        want_total, want_page = oracle_search(
            catalog_docs, text=text, category=category, toolkit=toolkit, limit=limit, offset=offset
        )
        assert total == want_total
        assert [(e.model_id, e.rev) for e in page] == [
            (d["model_id"], d["rev"]) for d in want_page
        ]
        for e in page:
            assert (e.model_id, e.rev) in published

    # explicit probes: anonymous and non-owner callers cannot see a private revision
    probes = sorted(private)[:20]
    for model_id, rev in probes:
        with pytest.raises((errors.ForbiddenError, errors.NotFoundError)):
            store.get_metadata(model_id, rev, caller=None)
        with pytest.raises((errors.ForbiddenError, errors.NotFoundError)):
            store.fetch_bundle(model_id, rev, caller="mallory")


# -- criterion: faulty executors are contained, never reported as success -----------


def test_runner_rejects_faulty_executors(tmp_path, instances):
    miswired = tmp_path / "miswired"
    with pytest.raises(errors.HandshakeError):
        spawn_stub(miswired, instances, STUB_WRONG_FINGERPRINT)
    assert wait_gone(stub_pid(miswired))

    hung = tmp_path / "hung"
    with pytest.raises(errors.HandshakeError):
        spawn_stub(hung, instances, STUB_SILENT, handshake_timeout_ms=500)
    assert wait_gone(stub_pid(hung)), "hung executor left an orphan process"

    inst = spawn_stub(tmp_path / "bad_output", instances, STUB_BAD_OUTPUT)
    with pytest.raises(errors.OutputValidationError) as caught:
        inst.predict("predict", {"x": [1.0]})
    assert isinstance(caught.value, errors.ValidationError)
    assert caught.value.error_code == "executor_output_invalid"


# -- criterion: the Node adapter interoperates end to end ----------------------------


def test_adapter_interop_keystone(tmp_path, registry, instances):
    node = shutil.which("node")
    if node is None or not ADAPTER_CLI.exists():
        pytest.skip("adapter package not built; primary suite runs without it")
    iris_fixture = ADAPTER_ROOT / "fixtures" / "iris_model.js"
    static_fixture = ADAPTER_ROOT / "fixtures" / "static_only.js"

    def run_adapter(*args, stdin_data=None):
        result = subprocess.run(
            [node, str(ADAPTER_CLI), *args],
            input=stdin_data, capture_output=True, text=True, timeout=120,
        )
        assert result.returncode == 0, result.stderr
        return json.loads(result.stdout)

    pushed = run_adapter(
        "push", str(iris_fixture),
        "--registry", registry.endpoint, "--token", "adapter-owner", "--name", "iris_model",
    )

    client = RegistryClient(registry.endpoint, token="adapter-owner")
    data = client.fetch_bundle(pushed["model_id"], pushed["rev"])
    pulled = bundle.unpack(data)
    assert bundle.digest(pulled) == pushed["digest"]

    # cross-language fingerprint agreement, and an Iris-shaped interface
    platform_print = sigcore.fingerprint(pulled.signature)
    assert platform_print == pushed["fingerprint"]
    assert pulled.signature == iris_signature()

    # dependency introspection: exactly the one installed third-party package, pinned
    installed = json.loads(
        (ADAPTER_ROOT / "node_modules" / "lodash" / "package.json").read_text()
    )["version"]
    assert [(e.name, e.version) for e in pulled.manifest.entries] == [("lodash", installed)]

    # a require that never executes is still caught by the static pass
    introspection = run_adapter("deps", str(static_fixture))
    assert "lodash" in introspection["static_imports"]
    assert "lodash" not in introspection["object_graph"]
    assert introspection["entries"] == [["lodash", installed]]

    # deployed under the primary runner; hello fingerprint was checked at handshake
    inst = spawn(materialize(data, tmp_path / "adapter_wd", handshake_timeout_ms=30_000))
    instances.append(inst)
    assert inst.state == "ready"
    assert inst.fingerprint == platform_print

    rng = random.Random(11)
    for _ in range(20):
        n = rng.randint(1, 4)
        message = {
            feature: [round(rng.uniform(0.0, 8.0), 1) for _ in range(n)]
            for feature in IRIS_FEATURES
        }
        served = inst.predict("classify", message)
        direct = run_adapter("call", str(iris_fixture), "classify", stdin_data=json.dumps(message))
        assert served == direct
        assert all(isinstance(v, int) for v in served["IrisType"])
