/**
 * Model declaration from typed functions. Each method declares its input and
 * output record up front; the Signature is derived in declaration order and
 * its fingerprint is identical to the platform's for the same descriptor.
 */
import { TypeDeclarationError } from "./errors";
import { fingerprint } from "./canonical";
import { checkSignature, DataType, record, RecordType, Signature, validateMessage } from "./types";

export type MethodFn = (message: Record<string, unknown>) => Record<string, unknown>;

export interface MethodDecl {
  input: Record<string, DataType>;
  output: Record<string, DataType>;
  fn: MethodFn;
}

export interface BoundMethod {
  name: string;
  input: RecordType;
  output: RecordType;
  fn: MethodFn;
}

const MODEL_TAG = Symbol.for("modelport-adapter.model");

export interface AdapterModel {
  readonly methods: BoundMethod[];
  readonly signature: Signature;
  readonly fingerprint: string;
}

function bindMethod(name: string, decl: MethodDecl): BoundMethod {
  if (decl === null || typeof decl !== "object") {
    throw new TypeDeclarationError(`${name}: expected { input, output, fn }`);
  }
  if (decl.input === undefined) {
    throw new TypeDeclarationError(`${name}: missing input declaration`);
  }
  if (decl.output === undefined) {
    throw new TypeDeclarationError(`${name}: missing output declaration`);
  }
  if (typeof decl.fn !== "function") {
    throw new TypeDeclarationError(`${name}: fn must be a function`);
  }
  const toRecord = (side: "input" | "output"): RecordType => {
    const declared = decl[side];
    if (declared === null || typeof declared !== "object" || Array.isArray(declared)) {
      throw new TypeDeclarationError(`${name}: ${side} must map field names to types`);
    }
    if (Object.keys(declared).length === 0) {
      throw new TypeDeclarationError(`${name}: ${side} declares no fields`);
    }
    return record(declared);
  };
  return { name, input: toRecord("input"), output: toRecord("output"), fn: decl.fn };
}

/** Declare a model from named typed functions. */
export function defineModel(methods: Record<string, MethodDecl>): AdapterModel {
  if (methods === null || typeof methods !== "object" || Object.keys(methods).length === 0) {
    throw new TypeDeclarationError("a model needs at least one named method");
  }
  const bound = Object.entries(methods).map(([name, decl]) => bindMethod(name, decl));
  const signature: Signature = {
    methods: bound.map((m) => ({ name: m.name, input: m.input, output: m.output })),
  };
  checkSignature(signature);
  const model: AdapterModel = {
    methods: bound,
    signature,
    fingerprint: fingerprint(signature),
  };
  Object.defineProperty(model, MODEL_TAG, { value: true });
  return model;
}

export function isAdapterModel(value: unknown): value is AdapterModel {
  return (
    value !== null &&
    typeof value === "object" &&
    (value as Record<symbol, unknown>)[MODEL_TAG] === true
  );
}

export class MethodNotFound extends Error {}

/** Decode a column message against the declared input, invoke, and encode. */
export function invoke(model: AdapterModel, method: string, message: unknown): Record<string, unknown> {
  const bound = model.methods.find((m) => m.name === method);
  if (bound === undefined) {
    throw new MethodNotFound(`model has no method ${JSON.stringify(method)}`);
  }
  const violations = validateMessage(message, bound.input);
  if (violations.length > 0) {
    throw new TypeError(`message does not conform to ${method} input: ${violations.join("; ")}`);
  }
  // pass only declared fields, in declaration order
  const doc = message as Record<string, unknown>;
  const decoded: Record<string, unknown> = {};
  for (const field of bound.input.fields) decoded[field.name] = doc[field.name];
  return bound.fn(decoded);
}
