/** Action normalization, behaviorally identical to the core parser.
 *
 * Conformance is enforced against the shared fixture in
 * conformance/parse_action_cases.json, which the core's own tests also run.
 */

import type { Space } from "./types.js";

const LOW_ACTIONS = new Set(["move", "left", "right", "stop"]);
const DIGITS = /^[0-9]+$/;

export class ActionParseError extends Error {
  readonly raw: string;

  constructor(message: string, raw: string) {
    super(`${message} (raw=${JSON.stringify(raw)})`);
    this.raw = raw;
  }
}

/** First whitespace token, case-insensitive; low vocabulary or a decimal
 * candidate index in [0, k) or "stop" for the panoramic space. */
export function parseAction(raw: string | null | undefined, space: Space, k = 0): string {
  if (raw === null || raw === undefined) {
    throw new ActionParseError("empty model output", "");
  }
  const tokens = raw.trim().split(/\s+/).filter((t) => t.length > 0);
  if (tokens.length === 0) {
    throw new ActionParseError("empty model output", raw);
  }
  const token = tokens[0].toLowerCase();
  if (space === "low") {
    if (LOW_ACTIONS.has(token)) return token;
    throw new ActionParseError("unknown low-level action", raw);
  }
  if (token === "stop") return "stop";
  if (!DIGITS.test(token)) {
    throw new ActionParseError("unknown panoramic action", raw);
  }
  const index = parseInt(token, 10);
  if (index < 0 || index >= k) {
    throw new ActionParseError(`invalid candidate (K=${k})`, raw);
  }
  return String(index);
}
