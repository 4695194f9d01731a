/** Episode-driving loop: prompt in, model decision out, one action per
 * request, with bounded retries and a stop fallback for hopeless output.
 */

import { EpisodeApiClient, ApiError } from "./client.js";
import type { Model } from "./model.js";
import { parseAction } from "./parse.js";
import type { EpisodeSummary, Space, StepResponse, VariantBody } from "./types.js";

export interface EpisodeResult {
  episodeId: string;
  instructionIndex: number;
  summary: EpisodeSummary;
  decisions: number;
}

export interface RunOptions {
  split: string;
  space: Space;
  variant?: VariantBody;
  /** Run only the first N episodes of the split listing (0 = all). */
  limit?: number;
  workers?: number;
  /** Model-output parse retries before the stop fallback kicks in. */
  maxModelRetries?: number;
  maxDecisions?: number;
  onEpisodeDone?: (result: EpisodeResult) => void;
}

function candidateCount(prompt: { vocabulary: string[] }): number {
  return prompt.vocabulary.filter((t) => t !== "stop").length;
}

export async function runEpisode(
  client: EpisodeApiClient,
  model: Model,
  split: string,
  episodeId: string,
  instructionIndex: number,
  space: Space,
  variant: VariantBody | undefined,
  maxModelRetries: number,
  maxDecisions: number,
): Promise<EpisodeResult> {
  const opened = await client.openEpisode(split, episodeId, instructionIndex, space, variant);
  const ctx = { episodeToken: opened.episode_token, client };
  let prompt = opened.prompt;
  let decisions = 0;
  for (;;) {
    if (decisions >= maxDecisions) {
      throw new Error(`episode ${episodeId}: exceeded ${maxDecisions} decisions`);
    }
    let action = "stop";
    let parsed = false;
    for (let attempt = 0; attempt <= maxModelRetries && !parsed; attempt++) {
      const raw = await model(prompt, ctx);
      try {
        action = parseAction(raw, space, candidateCount(prompt));
        parsed = true;
      } catch {
        // retry; falls back to "stop" when retries are exhausted
      }
    }
    let step: StepResponse;
    try {
      step = await client.postAction(ctx.episodeToken, action);
    } catch (err) {
      // A stale candidate index (e.g. prompt drift) is unrecoverable for a
      // greedy agent; stop cleanly rather than crash the worker.
      if (err instanceof ApiError && err.status === 422 && action !== "stop") {
        step = await client.postAction(ctx.episodeToken, "stop");
      } else {
        throw err;
      }
    }
    decisions += 1;
    if (step.done) {
      return {
        episodeId,
        instructionIndex,
        summary: step.summary as EpisodeSummary,
        decisions,
      };
    }
    prompt = step.prompt!;
  }
}

/** Run episodes of one split through the model with a bounded worker pool. */
export async function runAgent(
  apiUrl: string,
  model: Model,
  options: RunOptions,
): Promise<EpisodeResult[]> {
  const client = new EpisodeApiClient(apiUrl);
  await client.health();
  const listing = await client.listEpisodes(options.split);
  let episodes = listing.episodes;
  if (options.limit && options.limit > 0) {
    episodes = episodes.slice(0, options.limit);
  }
  const workers = Math.max(1, options.workers ?? 1);
  const maxModelRetries = options.maxModelRetries ?? 2;
  const maxDecisions = options.maxDecisions ?? 512;
  const results: EpisodeResult[] = new Array(episodes.length);
  let next = 0;
  async function worker() {
    for (;;) {
      const index = next++;
      if (index >= episodes.length) return;
      const ep = episodes[index];
      const result = await runEpisode(
        client,
        model,
        options.split,
        ep.episode_id,
        ep.instruction_index,
        options.space,
        options.variant,
        maxModelRetries,
        maxDecisions,
      );
      results[index] = result;
      options.onEpisodeDone?.(result);
    }
  }
  await Promise.all(Array.from({ length: Math.min(workers, episodes.length) }, worker));
  return results;
}

export function successRate(results: EpisodeResult[]): number {
  if (results.length === 0) return 0;
  return results.filter((r) => r.summary.success).length / results.length;
}

export function meanPathLength(results: EpisodeResult[]): number {
  if (results.length === 0) return 0;
  return results.reduce((acc, r) => acc + r.summary.pl_m, 0) / results.length;
}
