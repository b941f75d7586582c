/** Typed client for the costmap service REST API. All pipeline work happens
 * server-side; this module only moves JSON and raster bytes. */

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobInfo {
  id: string;
  kind: string;
  state: JobState;
  inputs: Record<string, unknown>;
  outputs: Record<string, string> | null;
  error: string | null;
  created_at: number;
  updated_at: number;
}

export interface ClassEntry {
  name: string;
  geometry: "linear" | "areal";
  source: string;
}

export interface MaskRefs {
  coarse_probability: string;
  coarse_mask: string;
  probability: string;
  mask: string;
  gated: string;
}

export interface SessionManifest {
  id: string;
  created_at: number;
  image: string;
  prompt: string | null;
  classes: string | null;
  ranks: string | null;
  masks: Record<string, MaskRefs>;
  program: string | null;
  costmap: string | null;
  costmap_png: string | null;
  plans: PlanRecord[];
}

export interface PlanRecord {
  costmap: string;
  start: [number, number];
  goal: [number, number];
  path: PlanResult;
}

export interface PlanResult {
  pixels: [number, number][];
  cost: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `${response.status} ${response.statusText}`;
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new Error(await errorDetail(response));
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    return (await this.request(path, init)).json() as Promise<T>;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.json<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  /** Upload raw PNG bytes; returns the content ref. */
  async uploadImage(bytes: Uint8Array | ArrayBuffer): Promise<string> {
    const body = bytes instanceof Uint8Array ? new Uint8Array(bytes) : bytes;
    const out = await this.json<{ ref: string }>("/images", {
      method: "POST",
      headers: { "content-type": "image/png" },
      body,
    });
    return out.ref;
  }

  async createSession(imageRef: string): Promise<string> {
    const out = await this.post<{ id: string }>("/sessions", { image: imageRef });
    return out.id;
  }

  manifest(sessionId: string): Promise<SessionManifest> {
    return this.json<SessionManifest>(`/sessions/${sessionId}/manifest`);
  }

  async submitInterpret(sessionId: string, prompt: string): Promise<string> {
    const out = await this.post<{ job: string }>("/jobs/interpret", {
      session: sessionId,
      prompt,
    });
    return out.job;
  }

  async submitSegment(sessionId: string): Promise<string> {
    const out = await this.post<{ job: string }>("/jobs/segment", { session: sessionId });
    return out.job;
  }

  async submitCompose(
    sessionId: string,
    source: { prompt?: string; program?: string },
  ): Promise<string> {
    const out = await this.post<{ job: string }>("/jobs/compose", {
      session: sessionId,
      ...source,
    });
    return out.job;
  }

  job(jobId: string): Promise<JobInfo> {
    return this.json<JobInfo>(`/jobs/${jobId}`);
  }

  /**
   * Poll a job until it reaches a terminal state. Resolves with the done
   * job; rejects with the job's recorded error string on failure.
   */
  async pollJob(jobId: string, intervalMs = 1000): Promise<JobInfo> {
    for (;;) {
      const info = await this.job(jobId);
      if (info.state === "done") return info;
      if (info.state === "failed") {
        throw new Error(info.error ?? `job ${jobId} failed`);
      }
      await sleep(intervalMs);
    }
  }

  plan(
    costmapRef: string,
    start: [number, number],
    goal: [number, number],
    sessionId?: string,
  ): Promise<PlanResult> {
    return this.post<PlanResult>("/plan", {
      costmap: costmapRef,
      start,
      goal,
      session: sessionId ?? null,
    });
  }

  /** URL for an artifact; usable directly as an <img> src. */
  artifactUrl(ref: string): string {
    return `${this.baseUrl}/artifacts/${ref}`;
  }

  async artifactBytes(ref: string): Promise<Uint8Array> {
    const response = await this.request(`/artifacts/${ref}`);
    return new Uint8Array(await response.arrayBuffer());
  }

  async artifactText(ref: string): Promise<string> {
    return (await this.request(`/artifacts/${ref}`)).text();
  }

  async artifactJson<T>(ref: string): Promise<T> {
    return (await this.request(`/artifacts/${ref}`)).json() as Promise<T>;
  }
}
