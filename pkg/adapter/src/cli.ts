/**
 * Command line: push a model, build its bundle, inspect dependencies,
 * call it directly, or serve a materialized bundle over stdio.
 *
 * Every command but serve prints exactly one JSON document on stdout.
 */
import * as fs from "node:fs";
import { parseArgs, ParseArgsConfig } from "node:util";

import { digest, pack } from "./bundle";
import { introspectModule, loadModuleMap } from "./deps";
import { AdapterError } from "./errors";
import { invoke } from "./model";
import { loadModelModule } from "./payload";
import { buildBundle, push } from "./push";
import { serve } from "./serve";

const USAGE = `usage:
  modelport-adapter push <model.js> --registry URL [--token T] [--name N] [model flags]
  modelport-adapter bundle <model.js> --out FILE [--name N] [model flags]
  modelport-adapter deps <module.js> [--source FILE ...] [--module-map FILE]
  modelport-adapter call <model.js> <method>    (message JSON on stdin)
  modelport-adapter fingerprint <model.js>
  modelport-adapter serve <workdir>

model flags: --creator --description --category --toolkit --source --module-map`;

const MODEL_FLAGS: ParseArgsConfig["options"] = {
  name: { type: "string" },
  creator: { type: "string" },
  description: { type: "string" },
  category: { type: "string" },
  toolkit: { type: "string" },
  source: { type: "string", multiple: true },
  "module-map": { type: "string" },
};

function emit(doc: unknown): void {
  process.stdout.write(JSON.stringify(doc) + "\n");
}

function readStdin(): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    process.stdin.on("data", (chunk) => chunks.push(chunk));
    process.stdin.on("end", () => resolve(Buffer.concat(chunks).toString("utf-8")));
    process.stdin.on("error", reject);
  });
}

interface Parsed {
  values: Record<string, string | boolean | (string | boolean)[] | undefined>;
  positionals: string[];
}

function parse(args: string[], options: ParseArgsConfig["options"]): Parsed {
  return parseArgs({ args, options, allowPositionals: true }) as Parsed;
}

function str(values: Parsed["values"], key: string): string | undefined {
  const value = values[key];
  return typeof value === "string" ? value : undefined;
}

function buildOptions(parsed: Parsed) {
  return {
    name: str(parsed.values, "name"),
    creator: str(parsed.values, "creator"),
    description: str(parsed.values, "description"),
    category: str(parsed.values, "category"),
    toolkit: str(parsed.values, "toolkit"),
    sources: (parsed.values.source as string[] | undefined) ?? [],
    moduleMapFile: str(parsed.values, "module-map"),
  };
}

async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  switch (command) {
    case "push": {
      const parsed = parse(rest, {
        ...MODEL_FLAGS,
        registry: { type: "string" },
        token: { type: "string" },
      });
      const [modelFile] = parsed.positionals;
      const registry = str(parsed.values, "registry") ?? process.env.MODELPORT_REGISTRY;
      const token = str(parsed.values, "token") ?? process.env.MODELPORT_TOKEN;
      if (!modelFile || !registry) {
        process.stderr.write("error: push needs a model file and --registry\n");
        return 1;
      }
      emit(await push(modelFile, registry, token, buildOptions(parsed)));
      return 0;
    }
    case "bundle": {
      const parsed = parse(rest, { ...MODEL_FLAGS, out: { type: "string", short: "o" } });
      const [modelFile] = parsed.positionals;
      const out = str(parsed.values, "out");
      if (!modelFile || !out) {
        process.stderr.write("error: bundle needs a model file and --out\n");
        return 1;
      }
      const built = buildBundle(modelFile, buildOptions(parsed));
      fs.writeFileSync(out, pack(built.bundle));
      emit({
        digest: built.digest,
        fingerprint: built.loaded.model.fingerprint,
        model_name: built.bundle.meta.model_name,
        entries: built.introspection.entries,
      });
      return 0;
    }
    case "deps": {
      const parsed = parse(rest, MODEL_FLAGS);
      const [moduleFile] = parsed.positionals;
      if (!moduleFile) {
        process.stderr.write("error: deps needs a module file\n");
        return 1;
      }
      emit(
        introspectModule(moduleFile, {
          sources: (parsed.values.source as string[] | undefined) ?? [],
          moduleMap: loadModuleMap(str(parsed.values, "module-map")),
        })
      );
      return 0;
    }
    case "call": {
      const [modelFile, method] = parse(rest, {}).positionals;
      if (!modelFile || !method) {
        process.stderr.write("error: call needs a model file and a method name\n");
        return 1;
      }
      const loaded = loadModelModule(modelFile);
      const message = JSON.parse(await readStdin()) as unknown;
      emit(invoke(loaded.model, method, message));
      return 0;
    }
    case "fingerprint": {
      const [modelFile] = parse(rest, {}).positionals;
      if (!modelFile) {
        process.stderr.write("error: fingerprint needs a model file\n");
        return 1;
      }
      emit({ fingerprint: loadModelModule(modelFile).model.fingerprint });
      return 0;
    }
    case "serve": {
      const [workdir] = parse(rest, {}).positionals;
      if (!workdir) {
        process.stderr.write("error: serve needs a workdir\n");
        return 1;
      }
      return serve(workdir, process.stdin, process.stdout);
    }
    case undefined:
    case "--help":
    case "-h":
      process.stderr.write(USAGE + "\n");
      return command === undefined ? 1 : 0;
    default:
      process.stderr.write(`error: unknown command ${command}\n${USAGE}\n`);
      return 1;
  }
}

main(process.argv.slice(2))
  .then((code) => process.exit(code))
  .catch((err) => {
    const prefix = err instanceof AdapterError ? err.code : "error";
    process.stderr.write(`${prefix}: ${err instanceof Error ? err.message : String(err)}\n`);
    process.exit(1);
  });
