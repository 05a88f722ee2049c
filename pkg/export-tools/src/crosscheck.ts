// Numerical parity gate between this package's reference head and the
// vocablens runtime: generate sample vectors, ask the runtime to project
// them through the exported head bundle (project --logits-out), compute the
// same logits here from the checkpoint weights, and compare max-abs.
//
//   node dist/crosscheck.js --checkpoint CKPT_DIR --head HEAD_BASE --out DIR
//        [--samples 100] [--seed 0] [--tolerance 1e-4] [--primary "python3 -m vocablens"]

import { spawnSync } from "node:child_process";
import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";

import { loadCheckpoint } from "./checkpoint.js";
import { gaussian, rng } from "./math.js";
import { headFromCheckpoint, headLogits } from "./mlmhead.js";
import { readBundle, tensor, writeBundle, writeIdsSidecar } from "./tensors.js";

export interface CrosscheckReport {
  passed: boolean;
  tolerance: number;
  samples: number;
  max_abs_per_input: number[];
  worst_input: number;
  worst_abs: number;
}

export function crosscheck(
  checkpointDir: string,
  headBase: string,
  outDir: string,
  samples = 100,
  seed = 0,
  tolerance = 1e-4,
  primaryCmd = "python3 -m vocablens",
): CrosscheckReport {
  const ckpt = loadCheckpoint(checkpointDir);
  const head = headFromCheckpoint(ckpt);
  mkdirSync(outDir, { recursive: true });

  // seeded sample vectors, written as an embedding bundle for the runtime
  const gauss = gaussian(rng(seed * 2654435761 + 97));
  const d = head.d;
  const vectors = new Float32Array(samples * d);
  for (let i = 0; i < vectors.length; i++) vectors[i] = gauss();
  const samplesBase = join(outDir, "samples");
  writeBundle(
    { tensors: new Map([["vectors", tensor([samples, d], vectors)]]),
      metadata: { similarity: "dot" } },
    samplesBase,
  );
  writeIdsSidecar(samplesBase, Array.from({ length: samples }, (_, i) => `s${i}`));

  const cmd = [
    ...primaryCmd.split(" "),
    "project",
    "--head", headBase,
    "--vocab", join(checkpointDir, "vocab.txt"),
    "--embeddings", samplesBase,
    "--top-k", "1",
    "--logits-out", "logits",
    "--out", join(outDir, "primary"),
  ];
  const proc = spawnSync(cmd[0], cmd.slice(1), { encoding: "utf-8" });
  if (proc.status !== 0) {
    throw new Error(`primary runtime failed (${proc.status}): ${proc.stderr}`);
  }
  const primaryLogits = readBundle(join(outDir, "primary", "logits")).tensors.get("logits");
  if (!primaryLogits || primaryLogits.shape[0] !== samples) {
    throw new Error("primary runtime produced no usable logits dump");
  }

  const maxAbs: number[] = [];
  const vocabSize = head.vocabSize;
  for (let i = 0; i < samples; i++) {
    const h = new Float64Array(d);
    for (let j = 0; j < d; j++) h[j] = vectors[i * d + j];
    const reference = headLogits(head, h);
    let worst = 0;
    for (let t = 0; t < vocabSize; t++) {
      const diff = Math.abs(reference[t] - primaryLogits.data[i * vocabSize + t]);
      if (diff > worst) worst = diff;
    }
    maxAbs.push(worst);
  }
  const worstAbs = Math.max(...maxAbs);
  const report: CrosscheckReport = {
    passed: worstAbs <= tolerance,
    tolerance,
    samples,
    max_abs_per_input: maxAbs,
    worst_input: maxAbs.indexOf(worstAbs),
    worst_abs: worstAbs,
  };
  writeFileSync(join(outDir, "crosscheck.json"), JSON.stringify(report, null, 2) + "\n");
  return report;
}

const isMain = process.argv[1]?.endsWith("crosscheck.js");
if (isMain) {
  const { values } = parseArgs({
    options: {
      checkpoint: { type: "string" },
      head: { type: "string" },
      out: { type: "string" },
      samples: { type: "string", default: "100" },
      seed: { type: "string", default: "0" },
      tolerance: { type: "string", default: "1e-4" },
      primary: { type: "string", default: "python3 -m vocablens" },
    },
  });
  if (!values.checkpoint || !values.head || !values.out) {
    console.error("usage: crosscheck --checkpoint DIR --head BASE --out DIR");
    process.exit(1);
  }
  try {
    const report = crosscheck(
      values.checkpoint, values.head, values.out,
      Number(values.samples), Number(values.seed), Number(values.tolerance),
      values.primary,
    );
    console.log(
      `crosscheck ${report.passed ? "PASS" : "FAIL"}: worst |diff| ${report.worst_abs} ` +
        `on input ${report.worst_input} (tolerance ${report.tolerance})`,
    );
    process.exit(report.passed ? 0 : 1);
  } catch (err) {
    console.error(String(err));
    process.exit(2);
  }
}
