/**
 * Thin client for the catalog registry's HTTP surface.
 */
import { RegistryError } from "./errors";

export interface UploadResponse {
  model_id: string;
  rev: number;
  digest: string;
  duplicate: boolean;
}

async function parseError(res: Response): Promise<never> {
  let code = "remote_error";
  let message = `registry answered ${res.status}`;
  try {
    const doc = (await res.json()) as { error_code?: string; message?: string };
    if (typeof doc.error_code === "string") code = doc.error_code;
    if (typeof doc.message === "string") message = doc.message;
  } catch {
    // body was not a JSON error document; keep the status line
  }
  throw new RegistryError(res.status, code, message);
}

export class RegistryClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token?: string
  ) {}

  async upload(archive: Uint8Array): Promise<UploadResponse> {
    const headers: Record<string, string> = { "Content-Type": "application/octet-stream" };
    if (this.token !== undefined) headers["X-Owner-Token"] = this.token;
    let res: Response;
    try {
      res = await fetch(`${this.baseUrl.replace(/\/$/, "")}/v1/models`, {
        method: "POST",
        headers,
        body: archive,
      });
    } catch (err) {
      throw new RegistryError(0, "unreachable", `cannot reach registry: ${String(err)}`);
    }
    if (res.status !== 201) await parseError(res);
    return (await res.json()) as UploadResponse;
  }
}
