/**
 * Bundle assembly and registry push for a declared model.
 */
import * as path from "node:path";

import { Bundle, digest, pack, PROTOCOL_VERSION } from "./bundle";
import { TypeDeclarationError } from "./errors";
import { IntrospectionResult, introspectModule, loadModuleMap } from "./deps";
import { LoadedModel, loadModelModule, serializePayload } from "./payload";
import { RegistryClient, UploadResponse } from "./registry";
import { IDENT_RE } from "./types";

export interface BuildOptions {
  name?: string;
  creator?: string;
  description?: string;
  category?: string;
  toolkit?: string;
  sources?: string[];
  moduleMapFile?: string;
}

export interface BuiltBundle {
  bundle: Bundle;
  loaded: LoadedModel;
  introspection: IntrospectionResult;
  digest: string;
}

/** The command the platform runs to serve bundles built by this adapter. */
export function serveEntry(): string {
  return `node ${path.join(__dirname, "cli.js")} serve {workdir}`;
}

export function buildBundle(modelFile: string, options: BuildOptions = {}): BuiltBundle {
  const loaded = loadModelModule(modelFile);
  const introspection = introspectModule(modelFile, {
    sources: options.sources,
    moduleMap: loadModuleMap(options.moduleMapFile),
  });
  const modelName = options.name ?? path.basename(modelFile, path.extname(modelFile));
  if (!IDENT_RE.test(modelName)) {
    throw new TypeDeclarationError(`model name ${JSON.stringify(modelName)} is not a valid identifier`);
  }
  const bundle: Bundle = {
    meta: {
      model_name: modelName,
      creator: options.creator ?? "adapter",
      created_at: new Date().toISOString(),
      description: options.description ?? "",
      category: options.category ?? "",
      toolkit: options.toolkit ?? "node",
    },
    signature: loaded.model.signature,
    manifest: {
      entries: introspection.entries.map(([name, version]) => ({ name, version })),
      runtime: { language_name: "node", language_version: process.versions.node },
    },
    runner: {
      executor_kind: "external",
      entry: serveEntry(),
      protocol_version: PROTOCOL_VERSION,
    },
    payload: serializePayload(loaded),
  };
  return { bundle, loaded, introspection, digest: digest(bundle) };
}

export interface PushResult extends UploadResponse {
  fingerprint: string;
}

export async function push(
  modelFile: string,
  registryUrl: string,
  token: string | undefined,
  options: BuildOptions = {}
): Promise<PushResult> {
  const built = buildBundle(modelFile, options);
  const client = new RegistryClient(registryUrl, token);
  const response = await client.upload(pack(built.bundle));
  if (response.digest !== built.digest) {
    throw new Error(
      `registry acknowledged digest ${response.digest} but the local bundle is ${built.digest}`
    );
  }
  return { ...response, fingerprint: built.loaded.model.fingerprint };
}
