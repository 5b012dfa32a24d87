import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { unzipSync } from "fflate";

export const ADAPTER_ROOT = path.resolve(__dirname, "..");
export const CLI = path.join(ADAPTER_ROOT, "dist", "cli.js");
export const FIXTURES = path.join(ADAPTER_ROOT, "fixtures");

export const IRIS_FINGERPRINT = "e0a8d4c1e22f699f5bdd03c84c895a61637f98ae423ebe7809abda6f8e162fce";

export function installedLodashVersion(): string {
  const file = path.join(ADAPTER_ROOT, "node_modules", "lodash", "package.json");
  return (JSON.parse(fs.readFileSync(file, "utf-8")) as { version: string }).version;
}

/** Run the built CLI and parse its single JSON document. */
export function cli(args: string[], stdin?: string): any {
  const stdout = execFileSync("node", [CLI, ...args], {
    input: stdin,
    encoding: "utf-8",
  });
  return JSON.parse(stdout);
}

export function tempDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

/** Build a fixture bundle through the CLI and lay its entries out in a directory. */
export function materializeFixture(fixture: string, workdir: string, extraArgs: string[] = []): any {
  const archive = path.join(workdir, "bundle.zip");
  const report = cli(["bundle", path.join(FIXTURES, fixture), "--out", archive, ...extraArgs]);
  const entries = unzipSync(fs.readFileSync(archive));
  for (const [name, content] of Object.entries(entries)) {
    fs.writeFileSync(path.join(workdir, name), content);
  }
  return report;
}
