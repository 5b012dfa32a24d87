export {
  AdapterError,
  RegistryError,
  SchemaError,
  SerializationError,
  TypeDeclarationError,
  UnresolvedDependencyError,
} from "./errors";
export {
  bool,
  bytes,
  DataType,
  f64,
  i64,
  IDENT_RE,
  listOf,
  ListOf,
  MAX_DEPTH,
  MethodSig,
  record,
  RecordType,
  Scalar,
  Signature,
  string,
  validateMessage,
} from "./types";
export { canonicalBytes, canonicalize, fingerprint, sha256Hex, stableStringify } from "./canonical";
export { AdapterModel, defineModel, invoke, isAdapterModel, MethodDecl, MethodFn } from "./model";
export {
  DEFAULT_MODULE_MAP,
  IntrospectionResult,
  introspectModule,
  loadModuleMap,
  objectGraphPackages,
  packageOfPath,
  packageOfSpecifier,
  staticImportPackages,
} from "./deps";
export { loadModelModule, deserializePayload, serializePayload, PAYLOAD_FORMAT } from "./payload";
export {
  Bundle,
  BundleMeta,
  DependencyManifest,
  digest,
  ENTRY_NAMES,
  entryDocuments,
  pack,
  PROTOCOL_VERSION,
  RunnerSpec,
  unpack,
} from "./bundle";
export { RegistryClient, UploadResponse } from "./registry";
export { buildBundle, BuildOptions, BuiltBundle, push, PushResult, serveEntry } from "./push";
export { handleLine, prepare, serve } from "./serve";
