/**
 * The portable bundle: a five-entry ZIP whose identity is a digest over
 * logical entry content in sorted-name order, immune to archive layout.
 */
import { unzipSync, zipSync, ZipOptions } from "fflate";

import { canonicalBytes, sha256Hex } from "./canonical";
import { SchemaError } from "./errors";
import { checkSignature, Signature } from "./types";

export const ENTRY_NAMES = [
  "manifest.json",
  "meta.json",
  "payload.bin",
  "runner.json",
  "signature.json",
] as const;

export const PROTOCOL_VERSION = 1;

export interface DependencyManifest {
  entries: Array<{ name: string; version: string }>;
  runtime: { language_name: string; language_version: string };
}

export interface BundleMeta {
  model_name: string;
  creator: string;
  created_at: string;
  description: string;
  category: string;
  toolkit: string;
}

export interface RunnerSpec {
  executor_kind: "builtin" | "external";
  entry: string;
  protocol_version: number;
}

export interface Bundle {
  meta: BundleMeta;
  signature: Signature;
  manifest: DependencyManifest;
  runner: RunnerSpec;
  payload: Uint8Array;
}

/** Logical content of each entry; JSON entries in canonical encoding. */
export function entryDocuments(b: Bundle): Record<string, Uint8Array> {
  return {
    "manifest.json": canonicalBytes(b.manifest),
    "meta.json": canonicalBytes(b.meta),
    "payload.bin": b.payload,
    "runner.json": canonicalBytes(b.runner),
    "signature.json": canonicalBytes(b.signature),
  };
}

/** SHA-256 over entry names and contents in sorted-name order. */
export function digest(b: Bundle): string {
  const entries = entryDocuments(b);
  const zero = Buffer.from([0]);
  const parts: Uint8Array[] = [];
  for (const name of Object.keys(entries).sort()) {
    parts.push(Buffer.from(name, "utf-8"), zero, entries[name], zero);
  }
  return sha256Hex(Buffer.concat(parts));
}

/** Serialize to archive bytes; entry order and timestamps are fixed. */
export function pack(b: Bundle): Uint8Array {
  const entries = entryDocuments(b);
  const archive: Record<string, Uint8Array> = {};
  for (const name of Object.keys(entries).sort()) archive[name] = entries[name];
  const options: ZipOptions = { level: 6, mtime: new Date(Date.UTC(1980, 0, 1)) };
  return zipSync(archive, options);
}

function parseJsonEntry(name: string, data: Uint8Array): unknown {
  try {
    return JSON.parse(Buffer.from(data).toString("utf-8")) as unknown;
  } catch (err) {
    throw new SchemaError(`${name} is not valid JSON: ${String(err)}`);
  }
}

function stringField(doc: Record<string, unknown>, field: string, entry: string, fallback?: string): string {
  const value = doc[field];
  if (value === undefined && fallback !== undefined) return fallback;
  if (typeof value !== "string") {
    throw new SchemaError(`${entry}: field ${field} must be a string`);
  }
  return value;
}

/** Parse archive bytes produced by this adapter or the platform. */
export function unpack(data: Uint8Array): Bundle {
  let raw: Record<string, Uint8Array>;
  try {
    raw = unzipSync(data);
  } catch (err) {
    throw new SchemaError(`not a readable archive: ${String(err)}`);
  }
  for (const required of ENTRY_NAMES) {
    if (!(required in raw)) throw new SchemaError(`missing entry ${required}`);
  }
  for (const name of Object.keys(raw)) {
    if (!(ENTRY_NAMES as readonly string[]).includes(name)) {
      throw new SchemaError(`unexpected entry ${name}`);
    }
  }

  const runnerDoc = parseJsonEntry("runner.json", raw["runner.json"]) as Record<string, unknown>;
  if (runnerDoc === null || typeof runnerDoc !== "object") {
    throw new SchemaError("runner.json: expected an object");
  }
  if (runnerDoc.protocol_version !== PROTOCOL_VERSION) {
    throw new SchemaError(`unsupported protocol_version ${String(runnerDoc.protocol_version)}`);
  }
  const kind = stringField(runnerDoc, "executor_kind", "runner.json");
  if (kind !== "builtin" && kind !== "external") {
    throw new SchemaError(`runner.json: unknown executor_kind ${kind}`);
  }

  const signature = parseJsonEntry("signature.json", raw["signature.json"]);
  checkSignature(signature);

  const metaDoc = parseJsonEntry("meta.json", raw["meta.json"]) as Record<string, unknown>;
  if (metaDoc === null || typeof metaDoc !== "object") {
    throw new SchemaError("meta.json: expected an object");
  }
  const manifestDoc = parseJsonEntry("manifest.json", raw["manifest.json"]) as {
    entries?: unknown;
    runtime?: unknown;
  };
  if (manifestDoc === null || typeof manifestDoc !== "object" || !Array.isArray(manifestDoc.entries)) {
    throw new SchemaError("manifest.json: expected an object with an 'entries' list");
  }
  const runtime = manifestDoc.runtime as Record<string, unknown>;
  if (runtime === null || typeof runtime !== "object") {
    throw new SchemaError("manifest.json: missing 'runtime' object");
  }

  return {
    meta: {
      model_name: stringField(metaDoc, "model_name", "meta.json"),
      creator: stringField(metaDoc, "creator", "meta.json"),
      created_at: stringField(metaDoc, "created_at", "meta.json"),
      description: stringField(metaDoc, "description", "meta.json", ""),
      category: stringField(metaDoc, "category", "meta.json", ""),
      toolkit: stringField(metaDoc, "toolkit", "meta.json", ""),
    },
    signature,
    manifest: {
      entries: (manifestDoc.entries as Array<Record<string, unknown>>).map((e) => ({
        name: stringField(e, "name", "manifest.json"),
        version: stringField(e, "version", "manifest.json"),
      })),
      runtime: {
        language_name: stringField(runtime, "language_name", "manifest.json"),
        language_version: stringField(runtime, "language_version", "manifest.json"),
      },
    },
    runner: { executor_kind: kind, entry: stringField(runnerDoc, "entry", "runner.json"), protocol_version: PROTOCOL_VERSION },
    payload: raw["payload.bin"],
  };
}
