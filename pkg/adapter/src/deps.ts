/**
 * Dependency introspection: what must be installed for a model module to run.
 *
 * Two passes. The object-graph pass loads the module and walks its resolved
 * require graph, recording the defining package of everything reachable.
 * The static pass scans source text for import and require specifiers, so a
 * dependency mentioned but never executed is still caught. The union is
 * filtered of runtime builtins, mapped to distribution names, and pinned at
 * the exact installed version.
 */
import * as fs from "node:fs";
import * as path from "node:path";
import { builtinModules, Module } from "node:module";

import { UnresolvedDependencyError } from "./errors";

export interface IntrospectionResult {
  object_graph: string[];
  static_imports: string[];
  entries: Array<[name: string, version: string]>;
}

const BUILTINS = new Set(builtinModules);

// the adapter is the serving shim, present wherever bundles of this runtime
// run, so it is filtered like a builtin rather than pinned into manifests
const SHIM_PACKAGE = "modelport-adapter";
const ADAPTER_ROOT = path.resolve(__dirname, "..");

/** Default specifier-to-distribution remaps; overridable via a config file. */
export const DEFAULT_MODULE_MAP: Record<string, string | null> = {
  [SHIM_PACKAGE]: null,
};

export function loadModuleMap(file?: string): Record<string, string | null> {
  if (!file) return { ...DEFAULT_MODULE_MAP };
  const doc = JSON.parse(fs.readFileSync(file, "utf-8")) as Record<string, string | null>;
  return { ...DEFAULT_MODULE_MAP, ...doc };
}

/** Top-level package name for a resolved filename, or null outside node_modules. */
export function packageOfPath(filename: string): string | null {
  const marker = `${path.sep}node_modules${path.sep}`;
  const at = filename.lastIndexOf(marker);
  if (at < 0) return null;
  const rest = filename.slice(at + marker.length).split(path.sep);
  if (rest[0]?.startsWith("@") && rest.length > 1) return `${rest[0]}/${rest[1]}`;
  return rest[0] ?? null;
}

/** Package name of a bare import specifier ("lodash/fp" -> "lodash"). */
export function packageOfSpecifier(spec: string): string | null {
  if (spec.startsWith(".") || spec.startsWith("/") || spec.startsWith("node:")) return null;
  const parts = spec.split("/");
  if (parts[0].startsWith("@")) return parts.length > 1 ? `${parts[0]}/${parts[1]}` : null;
  return parts[0];
}

function isShimFile(filename: string): boolean {
  return (
    filename.startsWith(ADAPTER_ROOT + path.sep) &&
    !filename.includes(`${path.sep}node_modules${path.sep}`)
  );
}

/**
 * Packages reachable from an already-loaded module. Local files are walked
 * recursively; a third-party package is recorded without descending into its
 * own requires, which npm resolves on install.
 */
export function objectGraphPackages(entry: NodeJS.Module): Set<string> {
  const found = new Set<string>();
  const seen = new Set<string>();
  const walk = (mod: NodeJS.Module): void => {
    if (seen.has(mod.filename)) return;
    seen.add(mod.filename);
    for (const child of mod.children) {
      if (isShimFile(child.filename)) continue;
      const pkg = packageOfPath(child.filename);
      if (pkg !== null) {
        if (pkg !== SHIM_PACKAGE) found.add(pkg);
      } else {
        walk(child);
      }
    }
  };
  walk(entry);
  return found;
}

const IMPORT_PATTERNS = [
  /\brequire\s*\(\s*["']([^"']+)["']\s*\)/g,
  /\bimport\s*\(\s*["']([^"']+)["']\s*\)/g,
  /\bimport\s+[^"'();]*?["']([^"']+)["']/g,
  /\bexport\s+[^"'();]*?\bfrom\s+["']([^"']+)["']/g,
];

/** Bare package specifiers mentioned in source text. */
export function staticImportPackages(source: string): Set<string> {
  const found = new Set<string>();
  for (const pattern of IMPORT_PATTERNS) {
    for (const match of source.matchAll(pattern)) {
      const pkg = packageOfSpecifier(match[1]);
      if (pkg !== null) found.add(pkg);
    }
  }
  return found;
}

function installedVersion(pkg: string, fromDir: string): string | null {
  // the model's own tree wins; the adapter's environment is the fallback
  const paths = [fromDir, ADAPTER_ROOT];
  try {
    return (
      JSON.parse(
        fs.readFileSync(require.resolve(`${pkg}/package.json`, { paths }), "utf-8")
      ) as { version: string }
    ).version;
  } catch {
    // packages hiding package.json behind "exports": walk up from the main file
    try {
      let dir = path.dirname(require.resolve(pkg, { paths }));
      while (dir !== path.dirname(dir)) {
        const candidate = path.join(dir, "package.json");
        if (fs.existsSync(candidate)) {
          const doc = JSON.parse(fs.readFileSync(candidate, "utf-8")) as {
            name?: string;
            version?: string;
          };
          if (doc.name === pkg && doc.version) return doc.version;
        }
        dir = path.dirname(dir);
      }
    } catch {
      return null;
    }
    return null;
  }
}

export interface IntrospectOptions {
  /** Extra source files for the static pass besides the module itself. */
  sources?: string[];
  /** Specifier remaps layered over the embedded defaults; null drops a module. */
  moduleMap?: Record<string, string | null>;
}

/**
 * Introspect a model module file: load it, run both passes, and pin the
 * union at installed versions. Throws UnresolvedDependencyError when any
 * surviving module has no installed distribution.
 */
export function introspectModule(moduleFile: string, options: IntrospectOptions = {}): IntrospectionResult {
  const resolved = path.resolve(moduleFile);
  require(resolved);
  const loaded = require.cache[resolved];
  if (loaded === undefined) {
    throw new Error(`module did not register in the require cache: ${resolved}`);
  }
  const objectGraph = objectGraphPackages(loaded);

  const staticImports = new Set<string>();
  const sources = [resolved, ...(options.sources ?? []).map((s) => path.resolve(s))];
  for (const source of sources) {
    for (const pkg of staticImportPackages(fs.readFileSync(source, "utf-8"))) {
      staticImports.add(pkg);
    }
  }

  const moduleMap = { ...DEFAULT_MODULE_MAP, ...(options.moduleMap ?? {}) };
  const names = new Set<string>();
  for (const pkg of [...objectGraph, ...staticImports]) {
    if (BUILTINS.has(pkg)) continue;
    const mapped = pkg in moduleMap ? moduleMap[pkg] : pkg;
    if (mapped !== null) names.add(mapped);
  }

  const entries: Array<[string, string]> = [];
  const unresolved: string[] = [];
  for (const name of [...names].sort()) {
    const version = installedVersion(name, path.dirname(resolved));
    if (version === null) {
      unresolved.push(name);
    } else {
      entries.push([name, version]);
    }
  }
  if (unresolved.length > 0) {
    throw new UnresolvedDependencyError(unresolved);
  }
  return {
    object_graph: [...objectGraph].sort(),
    static_imports: [...staticImports].sort(),
    entries,
  };
}

export { Module };
