import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { ActionParseError, parseAction } from "../src/parse.js";
import type { Space } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixturePath = join(here, "..", "..", "conformance", "parse_action_cases.json");

interface Case {
  raw: string;
  space: Space;
  k: number;
  expect: string | null;
}

describe("parseAction", () => {
  const doc = JSON.parse(readFileSync(fixturePath, "utf-8")) as { cases: Case[] };

  it("loads a non-trivial conformance fixture", () => {
    expect(doc.cases.length).toBeGreaterThan(20);
  });

  for (const c of doc.cases) {
    const label = `${JSON.stringify(c.raw)} space=${c.space} k=${c.k} -> ${c.expect}`;
    it(label, () => {
      if (c.expect === null) {
        expect(() => parseAction(c.raw, c.space, c.k)).toThrow(ActionParseError);
      } else {
        expect(parseAction(c.raw, c.space, c.k)).toBe(c.expect);
      }
    });
  }

  it("keeps the raw text on errors", () => {
    try {
      parseAction("banana split", "low");
      expect.unreachable();
    } catch (err) {
      expect((err as ActionParseError).raw).toBe("banana split");
    }
  });
});
