from __future__ import annotations

import io
import json
import random
import zipfile

import pytest
from hypothesis import given, settings

from helpers import FIXED_BUNDLE_DIGEST, affine_bundle, fixed_bundle, iris_centroid_bundle
from modelport import bundle
from modelport.errors import (
    ArchiveError,
    ContractError,
    PayloadTooLargeError,
    SchemaError,
    VersionError,
)
from oracles import oracle_archive_digest
from strategies import bundles


def rearchive(data: bytes, seed: int) -> bytes:
    """Rewrite the same entries with shuffled order, stored compression,
    and present-day timestamps."""
    rng = random.Random(seed)
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        entries = {name: zf.read(name) for name in zf.namelist()}
    names = list(entries)
    rng.shuffle(names)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name in names:
            info = zipfile.ZipInfo(name, date_time=(2024, rng.randint(1, 12), 1, 2, 3, 4))
            zf.writestr(info, entries[name])
    return buf.getvalue()


# -- digest ------------------------------------------------------------------


def test_fixed_bundle_digest_matches_golden():
    assert bundle.digest(fixed_bundle()) == FIXED_BUNDLE_DIGEST


def test_fixed_bundle_pack_is_byte_deterministic():
    assert bundle.pack(fixed_bundle()) == bundle.pack(fixed_bundle())


def test_digest_survives_rearchiving():
    original = bundle.pack(fixed_bundle())
    for seed in range(3):
        mangled = rearchive(original, seed)
        assert mangled != original  # the archive bytes really did change
        assert bundle.digest(bundle.unpack(mangled)) == FIXED_BUNDLE_DIGEST


def test_digest_sensitive_to_single_payload_byte():
    b = fixed_bundle()
    payload = bytearray(b.payload)
    payload[0] ^= 0x01
    altered = bundle.Bundle(b.meta, b.signature, b.manifest, b.runner, bytes(payload))
    assert bundle.digest(altered) != bundle.digest(b)


def test_digest_sensitive_to_meta():
    b = fixed_bundle()
    assert bundle.digest(bundle.with_meta(b, description="changed")) != bundle.digest(b)


def test_digest_agrees_with_external_oracle():
    b = fixed_bundle()
    assert oracle_archive_digest(bundle.pack(b)) == bundle.digest(b)


@settings(max_examples=50)
@given(bundles())
def test_digest_oracle_agreement_generated(b):
    assert oracle_archive_digest(bundle.pack(b)) == bundle.digest(b)


# -- round trips ----------------------------------------------------------------


@settings(max_examples=50)
@given(bundles())
def test_pack_unpack_round_trip(b):
    restored = bundle.unpack(bundle.pack(b))
    assert restored == b
    assert bundle.digest(restored) == bundle.digest(b)


@settings(max_examples=25)
@given(bundles())
def test_dir_round_trip(tmp_path_factory, b):
    workdir = tmp_path_factory.mktemp("bundle")
    bundle.write_dir(b, workdir)
    assert bundle.read_dir(workdir) == b


def test_read_dir_missing_entry(tmp_path):
    bundle.write_dir(fixed_bundle(), tmp_path)
    (tmp_path / "runner.json").unlink()
    with pytest.raises(ArchiveError, match="runner.json"):
        bundle.read_dir(tmp_path)


# -- archive structure rejection ----------------------------------------------------


def test_unpack_rejects_non_zip():
    with pytest.raises(ArchiveError):
        bundle.unpack(b"definitely not a zip archive")


def test_unpack_rejects_missing_entry():
    data = bundle.pack(fixed_bundle())
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        entries = {n: zf.read(n) for n in zf.namelist()}
    del entries["signature.json"]
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name, content in entries.items():
            zf.writestr(name, content)
    with pytest.raises(ArchiveError, match="signature.json"):
        bundle.unpack(buf.getvalue())


def test_unpack_rejects_extra_entry():
    data = bundle.pack(fixed_bundle())
    buf = io.BytesIO(data)
    with zipfile.ZipFile(buf, "a") as zf:
        zf.writestr("stowaway.txt", b"hi")
    with pytest.raises(ArchiveError, match="stowaway"):
        bundle.unpack(buf.getvalue())


def test_unpack_rejects_bad_json_entry():
    data = bundle.pack(fixed_bundle())
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        entries = {n: zf.read(n) for n in zf.namelist()}
    entries["meta.json"] = b"{truncated"
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name, content in entries.items():
            zf.writestr(name, content)
    with pytest.raises(SchemaError, match="meta.json"):
        bundle.unpack(buf.getvalue())


def test_unpack_rejects_unknown_protocol_version():
    data = bundle.pack(fixed_bundle())
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        entries = {n: zf.read(n) for n in zf.namelist()}
    runner = json.loads(entries["runner.json"])
    runner["protocol_version"] = 2
    entries["runner.json"] = json.dumps(runner).encode()
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name, content in entries.items():
            zf.writestr(name, content)
    with pytest.raises(VersionError, match="2"):
        bundle.unpack(buf.getvalue())


def test_unpack_enforces_declared_payload_cap():
    b = fixed_bundle()
    inflated = bundle.Bundle(b.meta, b.signature, b.manifest, b.runner, b"\x00" * 4096)
    data = bundle.pack(inflated)
    with pytest.raises(PayloadTooLargeError):
        bundle.unpack(data, payload_cap=1024)
    # the cap applies to payload.bin, not the archive as a whole
    assert bundle.unpack(data, payload_cap=4096).payload == inflated.payload


def test_pack_enforces_payload_cap():
    b = fixed_bundle()
    inflated = bundle.Bundle(b.meta, b.signature, b.manifest, b.runner, b"\x00" * 4096)
    with pytest.raises(ContractError):
        bundle.pack(inflated, payload_cap=1024)


# -- semantic validation ----------------------------------------------------------


def test_validate_clean_bundle():
    assert bundle.validate(fixed_bundle()) == []
    assert bundle.validate(iris_centroid_bundle()) == []


def test_validate_flags_empty_entry_command():
    b = fixed_bundle()
    broken = bundle.Bundle(b.meta, b.signature, b.manifest, bundle.RunnerSpec("builtin", ""), b.payload)
    assert "runner.entry empty" in bundle.validate(broken)


def test_validate_flags_unknown_executor_kind():
    b = fixed_bundle()
    broken = bundle.Bundle(b.meta, b.signature, b.manifest, bundle.RunnerSpec("docker", "x"), b.payload)
    assert any("executor_kind" in v for v in bundle.validate(broken))


def test_validate_flags_external_with_empty_payload():
    b = affine_bundle()
    broken = bundle.Bundle(
        b.meta,
        b.signature,
        bundle.DependencyManifest((), bundle.RuntimeInfo("python", "3.10")),
        bundle.RunnerSpec("external", "python3 serve.py {payload}"),
        b"",
    )
    assert any("payload.bin empty" in v for v in bundle.validate(broken))
    # builtin executors may run without a payload
    assert bundle.validate(affine_bundle()) == []
    assert affine_bundle().payload == b""


def test_validate_flags_bad_meta():
    b = fixed_bundle()
    broken = bundle.with_meta(b, model_name="9bad name", creator="", created_at="yesterday")
    violations = bundle.validate(broken)
    assert any("model_name" in v for v in violations)
    assert "meta.creator empty" in violations
    assert any("created_at" in v for v in violations)


def test_validate_flags_unpinned_and_duplicate_dependencies():
    b = fixed_bundle()
    manifest = bundle.DependencyManifest(
        (
            bundle.DependencyEntry("numpy", "1.26.4"),
            bundle.DependencyEntry("numpy", "1.26.4"),
            bundle.DependencyEntry("scipy", ""),
        ),
        bundle.RuntimeInfo("python", "3.10"),
    )
    violations = bundle.validate(bundle.Bundle(b.meta, b.signature, manifest, b.runner, b.payload))
    assert any("duplicated" in v for v in violations)
    assert any("scipy" in v and "pinned" in v for v in violations)


def test_pack_refuses_invalid_bundle():
    b = fixed_bundle()
    broken = bundle.with_meta(b, creator="")
    with pytest.raises(ContractError) as err:
        bundle.pack(broken)
    assert any("creator" in v for v in err.value.violations)


def test_payload_size_violation_message_names_both_numbers():
    b = fixed_bundle()
    inflated = bundle.Bundle(b.meta, b.signature, b.manifest, b.runner, b"\x00" * 2048)
    violations = bundle.validate(inflated, payload_cap=1024)
    assert violations == ["payload.bin exceeds size cap (2048 > 1024 bytes)"]
