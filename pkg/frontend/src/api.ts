/** Typed client for the session-service HTTP API.
 *
 * Every method is one endpoint; the server's error envelope
 * `{"error": {"code", "message"}}` becomes an {@link ApiError} carrying
 * both fields so views can switch on the code and show the message
 * verbatim.  `fetchImpl` is injectable for tests.
 */

import type {
  ApiErrorBody,
  GenerateResult,
  IngestResult,
  MetricsReport,
  OtmDocument,
  QaReport,
  SessionRow,
  TranscriptTurn,
  UploadResult,
  VersionDiff,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export interface GenerateRequest {
  prompt?: string;
  strategy?: "direct" | "chain-of-thought";
  backend?: "offline" | "remote";
  k?: number;
}

export interface IngestRequest {
  kind: string;
  title: string;
  text: string;
  weight?: number;
}

export class ThreatgenClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string = "",
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(
    method: "GET" | "POST",
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let code = "unknown-error";
      let message = `request failed with status ${response.status}`;
      try {
        const payload = (await response.json()) as ApiErrorBody;
        code = payload.error.code;
        message = payload.error.message;
      } catch {
        // non-JSON error body: keep the generic message
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/api/healthz");
  }

  async createSession(name: string): Promise<string> {
    const body = await this.request<{ id: string }>("POST", "/api/sessions", {
      name,
    });
    return body.id;
  }

  listSessions(): Promise<SessionRow[]> {
    return this.request("GET", "/api/sessions");
  }

  uploadDfd(sessionId: string, text: string): Promise<UploadResult> {
    return this.request("POST", `/api/sessions/${sessionId}/dfd`, { text });
  }

  ingestDocument(
    sessionId: string,
    document: IngestRequest,
  ): Promise<IngestResult> {
    return this.request(
      "POST",
      `/api/sessions/${sessionId}/documents`,
      document,
    );
  }

  generate(
    sessionId: string,
    request: GenerateRequest = {},
  ): Promise<GenerateResult> {
    return this.request("POST", `/api/sessions/${sessionId}/generate`, request);
  }

  getModel(sessionId: string, version: number): Promise<OtmDocument> {
    return this.request("GET", `/api/sessions/${sessionId}/model/${version}`);
  }

  getQa(sessionId: string, version: number): Promise<QaReport> {
    return this.request(
      "GET",
      `/api/sessions/${sessionId}/model/${version}/qa`,
    );
  }

  getMetrics(sessionId: string, version: number): Promise<MetricsReport> {
    return this.request(
      "GET",
      `/api/sessions/${sessionId}/model/${version}/metrics`,
    );
  }

  getDiff(
    sessionId: string,
    from: number,
    to: number,
  ): Promise<VersionDiff> {
    return this.request(
      "GET",
      `/api/sessions/${sessionId}/diff/${from}/${to}`,
    );
  }

  getTranscript(sessionId: string): Promise<TranscriptTurn[]> {
    return this.request("GET", `/api/sessions/${sessionId}/transcript`);
  }
}
