import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function fakeFetch(routes: Record<string, () => [number, unknown]>) {
  const seen: string[] = [];
  const fetcher = async (url: string, init?: RequestInit) => {
    seen.push(init?.method === "POST" ? `POST ${url}` : url);
    const key = Object.keys(routes).find((k) => url.startsWith(k));
    if (!key) return new Response("{}", { status: 404 });
    const [status, body] = routes[key]();
    return new Response(JSON.stringify(body), { status });
  };
  return { fetcher, seen };
}

describe("ApiClient", () => {
  it("serializes exclusions as repeated dotted params", async () => {
    const { fetcher, seen } = fakeFetch({
      "/api/query": () => [200, { design: [1, 0, 2, 0], mi: 0.4, round: 1, observations: [], context: [] }],
    });
    const api = new ApiClient("", fetcher);
    await api.query([[1, 0, 2, 0], [3, 1, 4, 0]]);
    expect(seen[0]).toBe("/api/query?exclude=1.0.2.0&exclude=3.1.4.0");
  });

  it("maps service errors to ApiError with status", async () => {
    const { fetcher } = fakeFetch({ "/api/query": () => [409, { error: "not ready" }] });
    const api = new ApiClient("", fetcher);
    await expect(api.query()).rejects.toMatchObject({ status: 409, message: "not ready" });
  });

  it("posts answers and returns the job id", async () => {
    const { fetcher, seen } = fakeFetch({ "/api/answer": () => [202, { job: "j-9" }] });
    const api = new ApiClient("", fetcher);
    const job = await api.answer([1, 0, 2, 0], "different");
    expect(job).toBe("j-9");
    expect(seen[0]).toBe("POST /api/answer");
  });

  it("polls jobs until done", async () => {
    let calls = 0;
    const { fetcher } = fakeFetch({
      "/api/job/j": () => {
        calls += 1;
        return [200, { status: calls < 3 ? "running" : "done" }];
      },
    });
    const api = new ApiClient("", fetcher);
    const waits: number[] = [];
    const status = await api.pollJob("j", 500, async (ms) => {
      waits.push(ms);
    });
    expect(status.status).toBe("done");
    expect(calls).toBe(3);
    expect(waits).toEqual([500, 500]);
  });

  it("raises when a job fails", async () => {
    const { fetcher } = fakeFetch({
      "/api/job/j": () => [200, { status: "failed", error: "boom" }],
    });
    const api = new ApiClient("", fetcher);
    await expect(api.pollJob("j", 1, async () => {})).rejects.toThrow("boom");
  });
});
