/**
 * Payload serialization by reference, the runtime's native route for code:
 * the payload names the defining module and export, which must be loadable
 * again wherever the bundle is served.
 */
import * as path from "node:path";

import { SerializationError } from "./errors";
import { AdapterModel, isAdapterModel } from "./model";

export const PAYLOAD_FORMAT = "modelport-adapter/1";

export interface PayloadDoc {
  format: string;
  module: string;
  export: string;
}

export interface LoadedModel {
  model: AdapterModel;
  moduleFile: string;
  exportName: string;
}

/** Load a model module and locate its exported AdapterModel. */
export function loadModelModule(moduleFile: string): LoadedModel {
  const resolved = path.resolve(moduleFile);
  let exported: unknown;
  try {
    exported = require(resolved);
  } catch (err) {
    throw new SerializationError(`cannot load model module ${resolved}: ${String(err)}`);
  }
  if (isAdapterModel(exported)) {
    return { model: exported, moduleFile: resolved, exportName: "" };
  }
  if (exported !== null && typeof exported === "object") {
    for (const [name, value] of Object.entries(exported)) {
      if (isAdapterModel(value)) {
        return { model: value, moduleFile: resolved, exportName: name };
      }
    }
  }
  throw new SerializationError(
    `${resolved} exports no model; define it with defineModel and export it by name`
  );
}

export function serializePayload(loaded: LoadedModel): Buffer {
  const doc: PayloadDoc = {
    format: PAYLOAD_FORMAT,
    module: loaded.moduleFile,
    export: loaded.exportName,
  };
  return Buffer.from(JSON.stringify(doc), "utf-8");
}

/** Resolve a payload back to the live model it names. */
export function deserializePayload(payload: Buffer | Uint8Array): LoadedModel {
  let doc: PayloadDoc;
  try {
    doc = JSON.parse(Buffer.from(payload).toString("utf-8")) as PayloadDoc;
  } catch (err) {
    throw new SerializationError(`payload is not a readable document: ${String(err)}`);
  }
  if (doc === null || typeof doc !== "object" || doc.format !== PAYLOAD_FORMAT) {
    throw new SerializationError(`payload format is not ${PAYLOAD_FORMAT}`);
  }
  const loaded = loadModelModule(doc.module);
  if (doc.export !== "" && doc.export !== loaded.exportName) {
    const exported = require(doc.module) as Record<string, unknown>;
    const value = exported[doc.export];
    if (!isAdapterModel(value)) {
      throw new SerializationError(`module does not export a model named ${doc.export}`);
    }
    return { model: value, moduleFile: doc.module, exportName: doc.export };
  }
  return loaded;
}
