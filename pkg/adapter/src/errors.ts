export class AdapterError extends Error {
  readonly code: string;

  constructor(code: string, message: string) {
    super(message);
    this.name = new.target.name;
    this.code = code;
  }
}

/** A declared function is missing or uses an unsupported type annotation. */
export class TypeDeclarationError extends AdapterError {
  constructor(message: string) {
    super("type_declaration_error", message);
  }
}

/** Imported modules with no installed distribution; the bundle cannot materialize. */
export class UnresolvedDependencyError extends AdapterError {
  readonly modules: string[];

  constructor(modules: string[]) {
    super("unresolved_dependency", `no installed distribution for: ${modules.join(", ")}`);
    this.modules = modules;
  }
}

/** The model cannot be serialized by reference (not reachable as a module export). */
export class SerializationError extends AdapterError {
  constructor(message: string) {
    super("serialization_error", message);
  }
}

/** Bundle entry missing or structurally wrong. */
export class SchemaError extends AdapterError {
  constructor(message: string) {
    super("schema_error", message);
  }
}

/** The registry refused a request. */
export class RegistryError extends AdapterError {
  readonly status: number;

  constructor(status: number, code: string, message: string) {
    super(code, message);
    this.status = status;
  }
}
