import { describe, expect, it } from "vitest";

import { ApiError, ThreatgenClient, type FetchLike } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

function recordingClient(
  reply: unknown,
  status = 200,
): { client: ThreatgenClient; calls: Recorded[] } {
  const calls: Recorded[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : undefined,
    });
    return new Response(JSON.stringify(reply), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { client: new ThreatgenClient("http://api", fetchImpl), calls };
}

describe("ThreatgenClient", () => {
  it("hits each endpoint with the documented method, path, and body", async () => {
    const { client, calls } = recordingClient({});
    await client.health();
    await client.listSessions().catch(() => undefined);
    await client.createSession("demo").catch(() => undefined);
    await client.uploadDfd("s1", 'system "x"');
    await client.ingestDocument("s1", {
      kind: "design",
      title: "T",
      text: "body",
    });
    await client.generate("s1", { prompt: "p", backend: "offline", k: 2 });
    await client.generate("s1");
    await client.getModel("s1", 3);
    await client.getQa("s1", 3);
    await client.getMetrics("s1", 3);
    await client.getDiff("s1", 1, 3);
    await client.getTranscript("s1");

    expect(calls.map((c) => [c.method, c.url])).toEqual([
      ["GET", "http://api/api/healthz"],
      ["GET", "http://api/api/sessions"],
      ["POST", "http://api/api/sessions"],
      ["POST", "http://api/api/sessions/s1/dfd"],
      ["POST", "http://api/api/sessions/s1/documents"],
      ["POST", "http://api/api/sessions/s1/generate"],
      ["POST", "http://api/api/sessions/s1/generate"],
      ["GET", "http://api/api/sessions/s1/model/3"],
      ["GET", "http://api/api/sessions/s1/model/3/qa"],
      ["GET", "http://api/api/sessions/s1/model/3/metrics"],
      ["GET", "http://api/api/sessions/s1/diff/1/3"],
      ["GET", "http://api/api/sessions/s1/transcript"],
    ]);
    expect(calls[2]?.body).toEqual({ name: "demo" });
    expect(calls[3]?.body).toEqual({ text: 'system "x"' });
    expect(calls[4]?.body).toEqual({
      kind: "design",
      title: "T",
      text: "body",
    });
    expect(calls[5]?.body).toEqual({ prompt: "p", backend: "offline", k: 2 });
    expect(calls[6]?.body).toEqual({});
  });

  it("unwraps the id from session creation", async () => {
    const { client } = recordingClient({ id: "abc123" });
    expect(await client.createSession("x")).toBe("abc123");
  });

  it("turns the error envelope into an ApiError verbatim", async () => {
    const { client } = recordingClient(
      { error: { code: "no-dfd", message: "session has no DFD yet" } },
      409,
    );
    const failure = await client.generate("s1").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(409);
    expect(failure.code).toBe("no-dfd");
    expect(failure.message).toBe("session has no DFD yet");
  });

  it("degrades gracefully on a non-JSON error body", async () => {
    const fetchImpl: FetchLike = async () =>
      new Response("<html>bad gateway</html>", { status: 502 });
    const client = new ThreatgenClient("", fetchImpl);
    const failure = await client.health().catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(502);
    expect(failure.code).toBe("unknown-error");
  });
});
