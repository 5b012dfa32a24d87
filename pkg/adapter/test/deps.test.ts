import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { packageOfPath, packageOfSpecifier, staticImportPackages } from "../src/deps";
import { CLI, cli, FIXTURES, installedLodashVersion, tempDir } from "./support";

describe("specifier and path mapping", () => {
  it("maps bare specifiers to their package", () => {
    expect(packageOfSpecifier("lodash")).toBe("lodash");
    expect(packageOfSpecifier("lodash/fp")).toBe("lodash");
    expect(packageOfSpecifier("@scope/pkg/deep/file")).toBe("@scope/pkg");
    expect(packageOfSpecifier("./local")).toBeNull();
    expect(packageOfSpecifier("/abs/path")).toBeNull();
    expect(packageOfSpecifier("node:fs")).toBeNull();
  });

  it("maps resolved filenames through the last node_modules segment", () => {
    expect(packageOfPath("/a/node_modules/lodash/lodash.js")).toBe("lodash");
    expect(packageOfPath("/a/node_modules/x/node_modules/@s/p/i.js")).toBe("@s/p");
    expect(packageOfPath("/a/src/local.js")).toBeNull();
  });
});

describe("static import scan", () => {
  it("sees require, import statements, and dynamic import", () => {
    const source = `
      const a = require("alpha");
      import beta from "beta/sub";
      import { g } from "@gamma/pkg";
      export { d } from "delta";
      const e = await import("epsilon");
      import "node:path";
      require("./relative");
    `;
    expect([...staticImportPackages(source)].sort()).toEqual([
      "@gamma/pkg",
      "alpha",
      "beta",
      "delta",
      "epsilon",
    ]);
  });
});

describe("introspection over the fixtures", () => {
  const lodash = installedLodashVersion();

  it("finds a package used at runtime and pins the installed version", () => {
    const result = cli(["deps", path.join(FIXTURES, "iris_model.js")]);
    expect(result.object_graph).toEqual(["lodash"]);
    expect(result.entries).toEqual([["lodash", lodash]]);
  });

  it("keeps a dependency that only the static pass can see", () => {
    const result = cli(["deps", path.join(FIXTURES, "static_only.js")]);
    expect(result.object_graph).toEqual([]);
    expect(result.static_imports).toContain("lodash");
    expect(result.entries).toEqual([["lodash", lodash]]);
  });

  it("yields no entries for a model over built-in types", () => {
    const result = cli(["deps", path.join(FIXTURES, "plain_model.js")]);
    expect(result.entries).toEqual([]);
  });

  it("never lists the serving shim itself", () => {
    for (const fixture of ["iris_model.js", "plain_model.js"]) {
      const result = cli(["deps", path.join(FIXTURES, fixture)]);
      expect(result.entries.map((e: string[]) => e[0])).not.toContain("modelport-adapter");
    }
  });

  it("fails fatally on imports with no installed distribution", () => {
    const dir = tempDir("adapter-deps-");
    const file = path.join(dir, "wants_missing.js");
    fs.writeFileSync(file, 'if (process.env.NOPE) require("surely-not-installed-xyz");\n');
    try {
      execFileSync("node", [CLI, "deps", file], { encoding: "utf-8" });
      throw new Error("expected the CLI to fail");
    } catch (err: any) {
      expect(String(err.stderr)).toContain("surely-not-installed-xyz");
      expect(err.status).toBe(1);
    }
  });

  it("honors a module map override file", () => {
    const dir = tempDir("adapter-map-");
    const map = path.join(dir, "map.json");
    fs.writeFileSync(map, JSON.stringify({ "surely-not-installed-xyz": null }));
    const file = path.join(dir, "wants_missing.js");
    fs.writeFileSync(file, 'if (process.env.NOPE) require("surely-not-installed-xyz");\n');
    const result = cli(["deps", file, "--module-map", map]);
    expect(result.entries).toEqual([]);
  });

  it("folds extra source files into the static pass", () => {
    const dir = tempDir("adapter-src-");
    const main = path.join(dir, "main.js");
    fs.writeFileSync(main, "module.exports = {};\n");
    const extra = path.join(dir, "extra.js");
    fs.writeFileSync(extra, 'import _ from "lodash";\n');
    const result = cli(["deps", main, "--source", extra]);
    expect(result.entries).toEqual([["lodash", lodash]]);
  });
});
