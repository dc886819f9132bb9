import { describe, expect, it, vi } from "vitest";
import { RenderClient, RefineClient } from "../src/api.js";
import { identityPose } from "../src/pose.js";
import { initialState, navigate } from "../src/state.js";

function pngResponse(tag: number): Response {
  return new Response(new Blob([new Uint8Array([tag])]), {
    status: 200,
    headers: { "content-type": "image/png" },
  });
}

function deferredFetch() {
  const pending: Array<{ resolve: (r: Response) => void; url: string; body?: unknown }> = [];
  const fetchImpl = (url: string, init?: RequestInit) =>
    new Promise<Response>((resolve) => {
      pending.push({ resolve, url, body: init?.body ? JSON.parse(init.body as string) : undefined });
    });
  return { pending, fetchImpl };
}

describe("RenderClient coalescing", () => {
  it("ten rapid inputs cause at most one in-flight request", async () => {
    const { pending, fetchImpl } = deferredFetch();
    const frames: number[] = [];
    const client = new RenderClient("", (f) => frames.push(f.seq), () => undefined, fetchImpl);

    for (let i = 0; i < 10; i++) {
      client.requestFrame({ pose: identityPose(), world: "coarse", mode: "live" });
      expect(client.inFlightCount).toBeLessThanOrEqual(1);
    }
    expect(pending.length).toBe(1); // only one actually sent

    pending[0].resolve(pngResponse(0));
    await vi.waitFor(() => expect(pending.length).toBe(2)); // coalesced trailing request
    pending[1].resolve(pngResponse(1));
    await vi.waitFor(() => expect(frames.length).toBe(2));
    expect(client.requestsSent).toBe(2);
  });

  it("drops stale responses: newest sequence wins", async () => {
    const { pending, fetchImpl } = deferredFetch();
    const frames: number[] = [];
    const client = new RenderClient("", (f) => frames.push(f.seq), () => undefined, fetchImpl);

    client.requestFrame({ pose: identityPose(), world: "coarse", mode: "live" });
    client.requestFrame({ pose: identityPose(), world: "coarse", mode: "live" }); // coalesces
    pending[0].resolve(pngResponse(0));
    await vi.waitFor(() => expect(pending.length).toBe(2));
    pending[1].resolve(pngResponse(1));
    await vi.waitFor(() => expect(frames.length).toBe(2));
    expect(frames).toEqual([1, 2]); // strictly increasing, no stale frame displayed
  });

  it("compare mode posts to /compare without world_id", async () => {
    const { pending, fetchImpl } = deferredFetch();
    const client = new RenderClient("", () => undefined, () => undefined, fetchImpl);
    client.requestFrame({ pose: identityPose(), world: "coarse", mode: "compare" });
    expect(pending[0].url).toBe("/compare");
    expect(pending[0].body).not.toHaveProperty("world_id");
    pending[0].resolve(pngResponse(0));
  });

  it("http errors surface through onError and do not crash", async () => {
    const errors: string[] = [];
    const fetchImpl = async () => new Response("{}", { status: 404 });
    const client = new RenderClient("", () => undefined, (m) => errors.push(m), fetchImpl);
    client.requestFrame({ pose: identityPose(), world: "nope", mode: "live" });
    await vi.waitFor(() => expect(errors.length).toBe(1));
    expect(errors[0]).toContain("404");
  });
});

describe("RefineClient", () => {
  it("posts the downsampled trajectory and polls to completion", async () => {
    const calls: Array<{ url: string; body?: unknown }> = [];
    let polls = 0;
    const fetchImpl = async (url: string, init?: RequestInit) => {
      calls.push({ url, body: init?.body ? JSON.parse(init.body as string) : undefined });
      if (url.endsWith("/refine/start")) {
        return new Response(JSON.stringify({ job_id: "j1" }), { status: 200 });
      }
      polls++;
      const status = polls < 3 ? "running" : "done";
      return new Response(
        JSON.stringify({ job_id: "j1", status, progress: polls, total_iters: 3, error: "" }),
        { status: 200 },
      );
    };
    const client = new RefineClient("", fetchImpl, 1);
    let state = initialState();
    for (let i = 0; i < 4; i++) state = navigate(state, { kind: "forward" });
    const seen: string[] = [];
    const final = await client.refineHere(state, "oracle", 3, (s) => seen.push(s.status));
    expect(final.status).toBe("done");
    expect(seen).toContain("running");
    const startCall = calls.find((c) => c.url.endsWith("/refine/start"))!;
    const body = startCall.body as { trajectory: { poses: unknown[] }; restorer: string };
    expect(body.trajectory.poses.length).toBe(4);
    expect(body.restorer).toBe("oracle");
  });

  it("surfaces 409 as 'already running'", async () => {
    const fetchImpl = async () => new Response("{}", { status: 409 });
    const client = new RefineClient("", fetchImpl, 1);
    let state = initialState();
    state = navigate(state, { kind: "forward" });
    await expect(client.refineHere(state, "oracle", 1)).rejects.toThrow(/already running/);
  });

  it("rejects an empty trajectory", async () => {
    const client = new RefineClient("", async () => new Response("{}"), 1);
    await expect(client.refineHere(initialState(), "oracle", 1)).rejects.toThrow(/no trajectory/);
  });
});
