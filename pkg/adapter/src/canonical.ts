/**
 * Canonical JSON encoding and interface fingerprints.
 *
 * The encoding is byte-compatible with the platform's: object keys sorted,
 * separators without whitespace, UTF-8 without ASCII escaping, and no
 * non-finite numbers. Two signatures share a fingerprint exactly when their
 * canonical bytes are equal.
 */
import { createHash } from "node:crypto";

import { checkSignature, Signature } from "./types";

export function stableStringify(value: unknown): string {
  if (value === null || typeof value === "string" || typeof value === "boolean") {
    return JSON.stringify(value);
  }
  if (typeof value === "number") {
    if (!Number.isFinite(value)) throw new TypeError("non-finite numbers are not encodable");
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(stableStringify).join(",") + "]";
  }
  if (typeof value === "object") {
    const doc = value as Record<string, unknown>;
    const parts = Object.keys(doc)
      .sort()
      .map((key) => JSON.stringify(key) + ":" + stableStringify(doc[key]));
    return "{" + parts.join(",") + "}";
  }
  throw new TypeError(`value of type ${typeof value} is not encodable`);
}

export function canonicalBytes(doc: unknown): Buffer {
  return Buffer.from(stableStringify(doc), "utf-8");
}

export function sha256Hex(data: Buffer | Uint8Array): string {
  return createHash("sha256").update(data).digest("hex");
}

/** Canonical bytes of a signature document. */
export function canonicalize(sig: Signature): Buffer {
  checkSignature(sig);
  return canonicalBytes(sig);
}

/** Hex SHA-256 of the canonical signature bytes. */
export function fingerprint(sig: Signature): string {
  return sha256Hex(canonicalize(sig));
}
