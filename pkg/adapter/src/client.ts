/** HTTP client speaking the episode API protocol verbatim. */

import type {
  OpenEpisodeResponse,
  Space,
  SplitListing,
  StepResponse,
  VariantBody,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly body: unknown;

  constructor(status: number, body: unknown, url: string) {
    super(`API ${status} from ${url}: ${JSON.stringify(body)}`);
    this.status = status;
    this.body = body;
  }
}

export interface RetryOptions {
  attempts?: number;
  baseDelayMs?: number;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

/** Fetch with bounded exponential backoff on transport errors, 5xx, and 409 (busy). */
async function fetchWithRetry(
  url: string,
  init: RequestInit,
  retry: Required<RetryOptions>,
): Promise<Response> {
  let lastError: unknown = null;
  for (let attempt = 0; attempt < retry.attempts; attempt++) {
    try {
      const resp = await fetch(url, init);
      if (resp.status >= 500 || resp.status === 409) {
        lastError = new ApiError(resp.status, await resp.text(), url);
      } else {
        return resp;
      }
    } catch (err) {
      lastError = err;
    }
    await sleep(retry.baseDelayMs * 2 ** attempt);
  }
  throw lastError;
}

export class EpisodeApiClient {
  readonly baseUrl: string;
  private readonly retry: Required<RetryOptions>;

  constructor(baseUrl: string, retry: RetryOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.retry = { attempts: retry.attempts ?? 4, baseDelayMs: retry.baseDelayMs ?? 150 };
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const url = `${this.baseUrl}${path}`;
    const resp = await fetchWithRetry(
      url,
      {
        method,
        headers: body === undefined ? {} : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      },
      this.retry,
    );
    const payload = await resp.json().catch(() => null);
    if (!resp.ok) {
      throw new ApiError(resp.status, payload, url);
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  splits(): Promise<{ splits: string[] }> {
    return this.request("GET", "/splits");
  }

  listEpisodes(split: string): Promise<SplitListing> {
    return this.request("GET", `/splits/${encodeURIComponent(split)}/episodes`);
  }

  openEpisode(
    split: string,
    episodeId: string,
    instructionIndex: number,
    space: Space,
    variant?: VariantBody,
  ): Promise<OpenEpisodeResponse> {
    return this.request("POST", "/episodes", {
      split,
      episode_id: episodeId,
      instruction_index: instructionIndex,
      space,
      ...(variant ? { variant } : {}),
    });
  }

  postAction(token: string, action: string): Promise<StepResponse> {
    return this.request("POST", `/episodes/${token}/action`, { token: action });
  }

  snapshot(token: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/episodes/${token}`);
  }

  /** Debug-only test fixture; requires the server's --debug flag. */
  expertAction(token: string): Promise<{ token: string }> {
    return this.request("GET", `/episodes/${token}/expert_action`);
  }
}
