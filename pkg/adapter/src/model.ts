/** Model-side adapters: prompt-to-chat translation, a real HTTP chat
 * endpoint, and the scripted fake models used for end-to-end testing.
 *
 * Image slots become textual view descriptions by default, so the full
 * loop runs without any renderer; a configured image store could swap the
 * placeholder text for attached images.
 */

import type { EpisodeApiClient } from "./client.js";
import type { PromptDoc, PromptSegmentDoc, ViewDescriptorDoc } from "./types.js";

export interface ModelContext {
  episodeToken: string;
  client: EpisodeApiClient;
}

/** A model maps a prompt to raw output text (later normalized by parseAction). */
export type Model = (prompt: PromptDoc, ctx: ModelContext) => Promise<string>;

export function describeView(view: ViewDescriptorDoc): string {
  const heading = Math.round(view.heading_deg);
  return `[${view.kind} view at node ${view.node}, heading ${heading} deg]`;
}

export interface ChatMessage {
  role: "system" | "user";
  content: string;
}

/** Flatten the prompt document into system+user chat messages. */
export function toChatMessages(prompt: PromptDoc): ChatMessage[] {
  const parts = prompt.segments.map((seg: PromptSegmentDoc) =>
    seg.type === "text" ? seg.value : describeView(seg.value),
  );
  return [
    { role: "system", content: prompt.system },
    { role: "user", content: parts.join("\n") },
  ];
}

/** OpenAI-style chat-completions endpoint adapter. */
export function chatEndpointModel(endpoint: string, modelName = "default"): Model {
  return async (prompt: PromptDoc): Promise<string> => {
    const resp = await fetch(endpoint, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        model: modelName,
        messages: toChatMessages(prompt),
        max_tokens: 8,
        temperature: 0,
      }),
    });
    if (!resp.ok) {
      throw new Error(`model endpoint ${endpoint} returned ${resp.status}`);
    }
    const body = (await resp.json()) as {
      choices?: { message?: { content?: string } }[];
      text?: string;
    };
    const content = body.choices?.[0]?.message?.content ?? body.text;
    if (typeof content !== "string") {
      throw new Error("model endpoint returned no text content");
    }
    return content;
  };
}

/** Echoes the server's expert fixture; requires a --debug server. */
export const expertEchoModel: Model = async (_prompt, ctx) => {
  const { token } = await ctx.client.expertAction(ctx.episodeToken);
  return token;
};

export const alwaysStopModel: Model = async () => "stop";

/** mulberry32: tiny deterministic PRNG so random runs are reproducible. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomModel(seed: number): Model {
  const rng = mulberry32(seed);
  return async (prompt: PromptDoc): Promise<string> => {
    const vocab = prompt.vocabulary;
    return vocab[Math.floor(rng() * vocab.length)];
  };
}

export type FakeModelName = "expert-echo" | "always-stop" | "random";

export function fakeModel(name: FakeModelName, seed = 0): Model {
  switch (name) {
    case "expert-echo":
      return expertEchoModel;
    case "always-stop":
      return alwaysStopModel;
    case "random":
      return randomModel(seed);
  }
}
