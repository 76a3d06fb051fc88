import { describe, expect, it, vi } from "vitest";

import { ApiError } from "../src/api.js";
import { pollScan } from "../src/poll.js";

function jobResponse(state: string, extra: Record<string, unknown> = {}) {
  return new Response(
    JSON.stringify({
      id: "j1",
      url: "http://x.onion/",
      state,
      submitted_at: "t",
      finished_at: null,
      report: null,
      error: null,
      ...extra,
    }),
    { status: 200, headers: { "Content-Type": "application/json" } },
  );
}

describe("pollScan", () => {
  it("keeps polling until the job is done", async () => {
    const states = ["queued", "crawling", "classifying", "done"];
    let call = 0;
    const fetcher = vi.fn(async () => jobResponse(states[call++]));
    const seen: string[] = [];

    const job = await pollScan("j1", {
      intervalMs: 1,
      fetcher,
      onUpdate: (update) => seen.push(update.state),
    });

    expect(job.state).toBe("done");
    expect(seen).toEqual(states);
    expect(fetcher).toHaveBeenCalledTimes(4);
  });

  it("treats failed as terminal and resolves with the error attached", async () => {
    const answers = [jobResponse("crawling"), jobResponse("failed", {
      error: "proxy unreachable",
    })];
    let call = 0;
    const fetcher = vi.fn(async () => answers[call++]);

    const job = await pollScan("j1", { intervalMs: 1, fetcher });
    expect(job.state).toBe("failed");
    expect(job.error).toBe("proxy unreachable");
  });

  it("rejects on transport failure", async () => {
    const fetcher = vi.fn(async () => {
      throw new TypeError("network down");
    });
    await expect(pollScan("j1", { intervalMs: 1, fetcher })).rejects.toThrow(
      "network down",
    );
  });

  it("rejects with ApiError when the job vanishes", async () => {
    const fetcher = vi.fn(
      async () =>
        new Response(JSON.stringify({ detail: "no such job" }), {
          status: 404,
        }),
    );
    const err = await pollScan("j1", { intervalMs: 1, fetcher }).catch(
      (e) => e,
    );
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
  });
});
