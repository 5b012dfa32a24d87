/**
 * Executor wire protocol, version 1, over stdio.
 *
 * Newline-delimited JSON, UTF-8. This side speaks first with a hello line
 * carrying the bundle signature's fingerprint, then answers predict, ping,
 * and shutdown. A bad request earns a per-request error object; the loop
 * itself never dies on one.
 */
import * as fs from "node:fs";
import * as path from "node:path";
import * as readline from "node:readline";

import { fingerprint, stableStringify } from "./canonical";
import { SchemaError } from "./errors";
import { AdapterModel, invoke, MethodNotFound } from "./model";
import { deserializePayload } from "./payload";
import { checkSignature, Signature } from "./types";

export const PROTOCOL = 1;

interface ServeContext {
  model: AdapterModel;
  signature: Signature;
  print: string;
}

/** Load the materialized bundle entries the executor needs. */
export function prepare(workdir: string): ServeContext {
  const read = (name: string): Buffer => {
    const file = path.join(workdir, name);
    if (!fs.existsSync(file)) throw new SchemaError(`missing entry ${name} in ${workdir}`);
    return fs.readFileSync(file);
  };

  // fail fast if the inferred manifest is not satisfied here
  const manifest = JSON.parse(read("manifest.json").toString("utf-8")) as {
    entries: Array<{ name: string; version: string }>;
  };
  const missing: string[] = [];
  for (const entry of manifest.entries ?? []) {
    try {
      require.resolve(entry.name, { paths: [workdir, __dirname] });
    } catch {
      missing.push(entry.name);
    }
  }
  if (missing.length > 0) {
    throw new SchemaError(`manifest not satisfied, missing: ${missing.join(", ")}`);
  }

  const signature = JSON.parse(read("signature.json").toString("utf-8")) as Signature;
  checkSignature(signature);
  const loaded = deserializePayload(read("payload.bin"));
  return { model: loaded.model, signature, print: fingerprint(signature) };
}

type Out = (line: string) => void;

function respond(out: Out, doc: Record<string, unknown>): void {
  out(stableStringify(doc) + "\n");
}

export function handleLine(ctx: ServeContext, line: string, out: Out): boolean {
  const trimmed = line.trim();
  if (!trimmed) return true;
  let doc: Record<string, unknown>;
  try {
    doc = JSON.parse(trimmed) as Record<string, unknown>;
  } catch (err) {
    respond(out, { type: "error", id: null, code: "decode_error", message: `undecodable line: ${String(err)}` });
    return true;
  }
  if (doc === null || typeof doc !== "object" || typeof doc.type !== "string") {
    respond(out, { type: "error", id: null, code: "decode_error", message: "message must be an object with a 'type'" });
    return true;
  }
  const id = typeof doc.id === "string" ? doc.id : null;
  switch (doc.type) {
    case "ping":
      respond(out, { type: "pong", id });
      return true;
    case "shutdown":
      return false;
    case "predict": {
      if (id === null) {
        respond(out, { type: "error", id: null, code: "decode_error", message: "predict needs a string id" });
        return true;
      }
      if (typeof doc.method !== "string") {
        respond(out, { type: "error", id, code: "decode_error", message: "predict needs a string method" });
        return true;
      }
      let payload: Record<string, unknown>;
      try {
        payload = invoke(ctx.model, doc.method, doc.payload);
      } catch (err) {
        if (err instanceof MethodNotFound || err instanceof TypeError) {
          respond(out, { type: "error", id, code: "decode_error", message: String(err) });
        } else {
          respond(out, { type: "error", id, code: "user_error", message: String(err) });
        }
        return true;
      }
      respond(out, { type: "result", id, payload });
      return true;
    }
    default:
      respond(out, { type: "error", id, code: "decode_error", message: `unknown message type ${doc.type}` });
      return true;
  }
}

/** Run the protocol until shutdown or end of input. Resolves with exit code. */
export function serve(workdir: string, input: NodeJS.ReadableStream, output: NodeJS.WritableStream): Promise<number> {
  const ctx = prepare(workdir);
  const out: Out = (line) => output.write(line);
  respond(out, {
    type: "hello",
    protocol: PROTOCOL,
    fingerprint: ctx.print,
    methods: ctx.signature.methods.map((m) => m.name),
  });
  return new Promise((resolve) => {
    const rl = readline.createInterface({ input, terminal: false });
    rl.on("line", (line) => {
      if (!handleLine(ctx, line, out)) {
        rl.close();
        resolve(0);
      }
    });
    rl.on("close", () => resolve(0));
  });
}
