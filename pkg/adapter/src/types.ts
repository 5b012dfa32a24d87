/**
 * The typed interface algebra: scalars, lists, and records composed into
 * method signatures. The in-memory shape doubles as the document form, so
 * a validated value can be canonicalized directly.
 */
import { TypeDeclarationError } from "./errors";

export type ScalarName = "i64" | "f64" | "bool" | "string" | "bytes";

export interface Scalar {
  kind: "scalar";
  name: ScalarName;
}

export interface ListOf {
  kind: "list";
  item: DataType;
}

export interface RecordField {
  name: string;
  type: DataType;
}

export interface RecordType {
  kind: "record";
  fields: RecordField[];
}

export type DataType = Scalar | ListOf | RecordType;

export interface MethodSig {
  name: string;
  input: RecordType;
  output: RecordType;
}

export interface Signature {
  methods: MethodSig[];
}

export const SCALAR_NAMES: readonly ScalarName[] = ["i64", "f64", "bool", "string", "bytes"];
export const MAX_DEPTH = 16;
export const IDENT_RE = /^[A-Za-z][A-Za-z0-9_]{0,63}$/;

export const i64: Scalar = { kind: "scalar", name: "i64" };
export const f64: Scalar = { kind: "scalar", name: "f64" };
export const bool: Scalar = { kind: "scalar", name: "bool" };
export const string: Scalar = { kind: "scalar", name: "string" };
export const bytes: Scalar = { kind: "scalar", name: "bytes" };

export function listOf(item: DataType): ListOf {
  return { kind: "list", item };
}

/** Build a record from field declarations; insertion order is kept. */
export function record(fields: Record<string, DataType>): RecordType {
  return {
    kind: "record",
    fields: Object.entries(fields).map(([name, type]) => ({ name, type })),
  };
}

export function typeDepth(t: DataType): number {
  switch (t.kind) {
    case "scalar":
      return 1;
    case "list":
      return 1 + typeDepth(t.item);
    case "record":
      return 1 + Math.max(...t.fields.map((f) => typeDepth(f.type)));
  }
}

function checkIdent(name: unknown, what: string): void {
  if (typeof name !== "string" || !IDENT_RE.test(name)) {
    throw new TypeDeclarationError(`${what} ${JSON.stringify(name)} is not a valid identifier`);
  }
}

export function checkType(t: unknown, what: string): asserts t is DataType {
  if (t === null || typeof t !== "object" || Array.isArray(t)) {
    throw new TypeDeclarationError(`${what}: not a declared type`);
  }
  const doc = t as Record<string, unknown>;
  switch (doc.kind) {
    case "scalar":
      if (!SCALAR_NAMES.includes(doc.name as ScalarName)) {
        throw new TypeDeclarationError(`${what}: unknown scalar ${JSON.stringify(doc.name)}`);
      }
      return;
    case "list":
      checkType(doc.item, `${what} item`);
      return;
    case "record": {
      if (!Array.isArray(doc.fields) || doc.fields.length === 0) {
        throw new TypeDeclarationError(`${what}: record must declare at least one field`);
      }
      const seen = new Set<string>();
      for (const field of doc.fields as Array<Record<string, unknown>>) {
        checkIdent(field?.name, `${what} field name`);
        const name = field.name as string;
        if (seen.has(name)) {
          throw new TypeDeclarationError(`${what}: duplicate field ${name}`);
        }
        seen.add(name);
        checkType(field.type, `${what} field ${name}`);
      }
      return;
    }
    default:
      throw new TypeDeclarationError(`${what}: unsupported type kind ${JSON.stringify(doc.kind)}`);
  }
}

export function checkRecord(t: unknown, what: string): asserts t is RecordType {
  checkType(t, what);
  if ((t as DataType).kind !== "record") {
    throw new TypeDeclarationError(`${what}: must be a record type`);
  }
  if (typeDepth(t as DataType) > MAX_DEPTH) {
    throw new TypeDeclarationError(`${what}: nesting depth exceeds ${MAX_DEPTH}`);
  }
}

export function checkSignature(sig: unknown): asserts sig is Signature {
  if (sig === null || typeof sig !== "object" || !Array.isArray((sig as Signature).methods)) {
    throw new TypeDeclarationError("signature must declare a method list");
  }
  const methods = (sig as Signature).methods;
  if (methods.length === 0) {
    throw new TypeDeclarationError("signature must declare at least one method");
  }
  const seen = new Set<string>();
  for (const m of methods) {
    checkIdent(m?.name, "method name");
    if (seen.has(m.name)) {
      throw new TypeDeclarationError(`duplicate method ${m.name}`);
    }
    seen.add(m.name);
    checkRecord(m.input, `method ${m.name} input`);
    checkRecord(m.output, `method ${m.name} output`);
  }
}

// -- message conformance -------------------------------------------------------

const I64_MIN = -(2n ** 63n);
const I64_MAX = 2n ** 63n - 1n;
const BASE64_RE = /^[A-Za-z0-9+/]*={0,2}$/;

function scalarViolation(value: unknown, name: ScalarName): string | null {
  switch (name) {
    case "i64":
      if (typeof value !== "number" || !Number.isInteger(value)) return "expected an integer";
      if (BigInt(value) < I64_MIN || BigInt(value) > I64_MAX) {
        return "integer out of 64-bit range";
      }
      return null;
    case "f64":
      if (typeof value !== "number" || !Number.isFinite(value)) return "expected a finite number";
      return null;
    case "bool":
      return typeof value === "boolean" ? null : "expected a boolean";
    case "string":
      return typeof value === "string" ? null : "expected a string";
    case "bytes":
      if (typeof value !== "string" || value.length % 4 !== 0 || !BASE64_RE.test(value)) {
        return "expected base64-encoded bytes";
      }
      return null;
  }
}

/** Path-tagged conformance violations of a value against a declared type. */
export function validateMessage(value: unknown, declared: DataType, path = "$"): string[] {
  const out: string[] = [];
  walk(value, declared, path, out);
  return out;
}

function walk(value: unknown, declared: DataType, path: string, out: string[]): void {
  switch (declared.kind) {
    case "scalar": {
      const why = scalarViolation(value, declared.name);
      if (why !== null) out.push(`${path}: ${why}`);
      return;
    }
    case "list": {
      if (!Array.isArray(value)) {
        out.push(`${path}: expected a list`);
        return;
      }
      value.forEach((item, i) => walk(item, declared.item, `${path}[${i}]`, out));
      return;
    }
    case "record": {
      if (value === null || typeof value !== "object" || Array.isArray(value)) {
        out.push(`${path}: expected an object`);
        return;
      }
      const doc = value as Record<string, unknown>;
      const declaredNames = new Set(declared.fields.map((f) => f.name));
      for (const field of declared.fields) {
        if (!(field.name in doc)) {
          out.push(`${path}.${field.name}: missing`);
        } else {
          walk(doc[field.name], field.type, `${path}.${field.name}`, out);
        }
      }
      for (const name of Object.keys(doc).sort()) {
        if (!declaredNames.has(name)) out.push(`${path}.${name}: undeclared field`);
      }
      return;
    }
  }
}
