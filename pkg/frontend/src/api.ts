/**
 * Service client: frame requests with request coalescing and stale-response
 * dropping, plus the refine job workflow (start, poll, completion callback).
 *
 * Coalescing contract: at most one render request is in flight; inputs that
 * arrive meanwhile only remember the newest wanted state, which is fetched
 * as soon as the in-flight response lands. Responses carry the sequence
 * number of their request; anything older than the latest displayed frame
 * is dropped.
 */
import { Pose, poseToWire } from "./pose.js";
import { JobStatus, ViewerMode, refineTrajectory, ViewerState } from "./state.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface FrameRequest {
  pose: Pose;
  world: string;
  mode: ViewerMode;
}

export interface FrameResult {
  seq: number;
  blob: Blob;
  mode: ViewerMode;
}

export class RenderClient {
  private seq = 0;
  private displayedSeq = -1;
  private inFlight = false;
  private pending: FrameRequest | null = null;
  public requestsSent = 0;

  constructor(
    private baseUrl: string,
    private onFrame: (frame: FrameResult) => void,
    private onError: (message: string) => void = () => undefined,
    private fetchImpl: FetchLike = fetch,
  ) {}

  /** Ask for a frame; rapid calls coalesce onto the newest state. */
  requestFrame(req: FrameRequest): void {
    if (this.inFlight) {
      this.pending = req;
      return;
    }
    void this.send(req);
  }

  get inFlightCount(): number {
    return this.inFlight ? 1 : 0;
  }

  private async send(req: FrameRequest): Promise<void> {
    const seq = ++this.seq;
    this.inFlight = true;
    this.requestsSent++;
    const url = req.mode === "compare" ? `${this.baseUrl}/compare` : `${this.baseUrl}/render`;
    const body =
      req.mode === "compare"
        ? { pose: poseToWire(req.pose) }
        : { world_id: req.world, pose: poseToWire(req.pose) };
    try {
      const resp = await this.fetchImpl(url, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
      if (!resp.ok) {
        this.onError(`render failed: ${resp.status}`);
      } else {
        const blob = await resp.blob();
        if (seq > this.displayedSeq) {
          this.displayedSeq = seq;
          this.onFrame({ seq, blob, mode: req.mode });
        }
      }
    } catch (err) {
      this.onError(`render failed: ${String(err)}`);
    } finally {
      this.inFlight = false;
      if (this.pending) {
        const next = this.pending;
        this.pending = null;
        void this.send(next);
      }
    }
  }
}

export interface RefineStatus {
  job_id: string;
  status: JobStatus;
  progress: number;
  total_iters: number;
  error: string;
}

export class RefineClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
    private pollIntervalMs = 500,
  ) {}

  /**
   * Start a refinement along the walked trajectory and resolve with the
   * final status once the job leaves the running state. A 409 (job already
   * running) surfaces as an error with that message.
   */
  async refineHere(
    state: ViewerState,
    restorer: string,
    iters: number,
    onStatus: (s: RefineStatus) => void = () => undefined,
  ): Promise<RefineStatus> {
    const poses = refineTrajectory(state);
    if (poses.length === 0) throw new Error("no trajectory walked yet");
    const resp = await this.fetchImpl(`${this.baseUrl}/refine/start`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        trajectory: { poses: poses.map(poseToWire) },
        restorer,
        iters,
      }),
    });
    if (resp.status === 409) throw new Error("refinement already running");
    if (!resp.ok) throw new Error(`refine start failed: ${resp.status}`);

    for (;;) {
      await new Promise((r) => setTimeout(r, this.pollIntervalMs));
      const statusResp = await this.fetchImpl(`${this.baseUrl}/refine/status`);
      if (!statusResp.ok) throw new Error(`status failed: ${statusResp.status}`);
      const status = (await statusResp.json()) as RefineStatus;
      onStatus(status);
      if (status.status === "done" || status.status === "failed") return status;
    }
  }

  async worlds(): Promise<string[]> {
    const resp = await this.fetchImpl(`${this.baseUrl}/worlds`);
    if (!resp.ok) throw new Error(`worlds failed: ${resp.status}`);
    const data = (await resp.json()) as { worlds: string[] };
    return data.worlds;
  }
}
