import { execFileSync } from "node:child_process";
import { describe, expect, it } from "vitest";

import { fingerprint } from "../src/canonical";
import { checkSignature } from "../src/types";
import type { DataType, MethodSig, RecordType, ScalarName, Signature } from "../src/types";

// the platform implementation, fed the same documents over JSONL
const PYTHON_FINGERPRINTER = [
  "import sys, json",
  "from modelport import sigcore",
  "for line in sys.stdin:",
  "    line = line.strip()",
  "    if not line:",
  "        continue",
  "    sig = sigcore.from_document(json.loads(line))",
  "    print(sigcore.fingerprint(sig))",
].join("\n");

let platformAvailable = true;
try {
  execFileSync("python3", ["-c", "import modelport.sigcore"], { stdio: "ignore" });
} catch {
  platformAvailable = false;
}

// mulberry32: tiny deterministic PRNG so the corpus is reproducible
function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const SCALARS: ScalarName[] = ["i64", "f64", "bool", "string", "bytes"];
const FIRST = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
const REST = FIRST + "0123456789_";

function pick<T>(r: () => number, pool: readonly T[]): T {
  return pool[Math.floor(r() * pool.length)];
}

function ident(r: () => number): string {
  const len = 1 + Math.floor(r() * 12);
  let out = pick(r, FIRST.split(""));
  for (let i = 1; i < len; i++) out += pick(r, REST.split(""));
  return out;
}

function uniqueIdents(r: () => number, count: number): string[] {
  const seen = new Set<string>();
  while (seen.size < count) seen.add(ident(r));
  return [...seen];
}

function genType(r: () => number, depth: number): DataType {
  const roll = r();
  if (depth >= 4 || roll < 0.55) return { kind: "scalar", name: pick(r, SCALARS) };
  if (roll < 0.8) return { kind: "list", item: genType(r, depth + 1) };
  return genRecord(r, depth + 1);
}

function genRecord(r: () => number, depth: number): RecordType {
  const names = uniqueIdents(r, 1 + Math.floor(r() * 4));
  return {
    kind: "record",
    fields: names.map((name) => ({ name, type: genType(r, depth) })),
  };
}

function genSignature(r: () => number): Signature {
  const names = uniqueIdents(r, 1 + Math.floor(r() * 3));
  const methods: MethodSig[] = names.map((name) => ({
    name,
    input: genRecord(r, 1),
    output: genRecord(r, 1),
  }));
  return { methods };
}

describe.skipIf(!platformAvailable)("cross-language fingerprints", () => {
  it("agrees with the platform on 50 generated signatures", () => {
    const r = rng(20240817);
    const corpus: Signature[] = [];
    for (let i = 0; i < 50; i++) {
      const sig = genSignature(r);
      checkSignature(sig);
      corpus.push(sig);
    }

    const jsonl = corpus.map((sig) => JSON.stringify(sig)).join("\n") + "\n";
    const stdout = execFileSync("python3", ["-c", PYTHON_FINGERPRINTER], {
      input: jsonl,
      encoding: "utf-8",
    });
    const theirs = stdout.trim().split("\n");
    const ours = corpus.map((sig) => fingerprint(sig));
    expect(theirs).toHaveLength(50);
    expect(ours).toEqual(theirs);
  });
});
