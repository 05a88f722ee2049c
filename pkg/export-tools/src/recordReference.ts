// Dev utility: regenerate test/recorded_reference.ts (the frozen encoder
// output for the pinned fixture checkpoint). Run after an intentional
// encoder change:   npm run build && node dist/recordReference.js

import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { loadCheckpoint } from "./checkpoint.js";
import { Encoder } from "./encoder.js";
import { makeFixtureCheckpoint } from "./fixtures.js";

const isMain = process.argv[1]?.endsWith("recordReference.js");
if (isMain) {
  const dir = join(mkdtempSync(join(tmpdir(), "record-ref-")), "ckpt");
  makeFixtureCheckpoint(dir, 11);
  const encoder = new Encoder(loadCheckpoint(dir));
  const v = encoder.encode("great lakes", "cls");
  const body = [...v].map((x) => x.toPrecision(17)).join(",\n  ");
  process.stdout.write(
    "// CLS vector of \"great lakes\" under the seed-11 fixture checkpoint.\n" +
      "// Regenerate with: npm run build && node dist/recordReference.js\n" +
      `export const RECORDED_CLS_GREAT_LAKES: number[] = [\n  ${body},\n];\n`,
  );
}
