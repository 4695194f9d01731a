/** Agent CLI: drive episodes on a running episode API with a model
 * endpoint or a scripted fake model.
 *
 * Usage:
 *   node dist/cli.js --api http://127.0.0.1:8800 --fake-model expert-echo \
 *     --split synthetic --space pano --limit 20 --workers 4
 */

import { parseArgs } from "node:util";

import { meanPathLength, runAgent, successRate } from "./agent.js";
import { chatEndpointModel, fakeModel, type FakeModelName } from "./model.js";
import type { Space } from "./types.js";

async function main(): Promise<number> {
  const { values } = parseArgs({
    options: {
      api: { type: "string" },
      model: { type: "string" },
      "fake-model": { type: "string" },
      split: { type: "string" },
      space: { type: "string", default: "pano" },
      limit: { type: "string", default: "0" },
      workers: { type: "string", default: "1" },
      "resize-half": { type: "boolean", default: false },
      seed: { type: "string", default: "0" },
      vfov: { type: "string" },
      "no-adjust": { type: "boolean", default: false },
    },
  });
  if (!values.api) {
    console.error("error: --api <url> is required");
    return 2;
  }
  if (!values.model && !values["fake-model"]) {
    console.error("error: one of --model <url> or --fake-model <name> is required");
    return 2;
  }
  const fake = values["fake-model"];
  if (fake && !["expert-echo", "always-stop", "random"].includes(fake)) {
    console.error(`error: unknown fake model ${fake}`);
    return 2;
  }
  const model = fake
    ? fakeModel(fake as FakeModelName, parseInt(values.seed!, 10))
    : chatEndpointModel(values.model!);
  const space = values.space as Space;
  if (space !== "low" && space !== "pano") {
    console.error(`error: unknown space ${values.space}`);
    return 2;
  }
  let split = values.split;
  if (!split) {
    const resp = await fetch(`${values.api.replace(/\/+$/, "")}/splits`);
    const body = (await resp.json()) as { splits: string[] };
    split = body.splits[0];
    if (!split) {
      console.error("error: the server exposes no splits");
      return 1;
    }
  }
  const variant: Record<string, unknown> = {};
  if (values.vfov) variant.vfov_deg = parseFloat(values.vfov);
  if (values["no-adjust"]) variant.auto_adjust = false;
  const results = await runAgent(values.api, model, {
    split,
    space,
    limit: parseInt(values.limit!, 10),
    workers: parseInt(values.workers!, 10),
    variant: Object.keys(variant).length ? variant : undefined,
    onEpisodeDone: (r) =>
      console.log(
        `${r.episodeId}#${r.instructionIndex}: success=${r.summary.success}` +
          ` pl=${r.summary.pl_m.toFixed(2)} ne=${r.summary.ne_m.toFixed(2)}` +
          ` decisions=${r.decisions}`,
      ),
  });
  console.log(
    `episodes=${results.length} SR=${successRate(results).toFixed(3)}` +
      ` meanPL=${meanPathLength(results).toFixed(2)}`,
  );
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  },
);
