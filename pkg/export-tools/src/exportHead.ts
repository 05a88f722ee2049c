// Export a checkpoint's MLM-head parameters (plus its vocabulary) into the
// tensor-bundle format the vocablens runtime loads.
//
//   node dist/exportHead.js --checkpoint CKPT_DIR --out OUT_BASE

import { copyFileSync, mkdirSync } from "node:fs";
import { dirname, join } from "node:path";
import { parseArgs } from "node:util";

import { HEAD_TENSOR_MAP, loadCheckpoint, missingHeadTensors } from "./checkpoint.js";
import { sha256File, writeExportManifest } from "./manifest.js";
import { TensorBundle, tensor, writeBundle } from "./tensors.js";

export function exportHead(checkpointDir: string, outBase: string): string[] {
  const ckpt = loadCheckpoint(checkpointDir);
  const missing = missingHeadTensors(ckpt);
  if (missing.length > 0) {
    throw new Error(
      `${checkpointDir}: checkpoint has no complete MLM head; absent tensors: ${missing.join(", ")}`,
    );
  }
  const bundle: TensorBundle = {
    tensors: new Map(
      Object.entries(HEAD_TENSOR_MAP).map(([bundleName, ckptName]) => {
        const t = ckpt.tensors.get(ckptName)!;
        return [bundleName, tensor(t.shape, t.data)];
      }),
    ),
    metadata: {
      activation: ckpt.config.hidden_act === "identity" ? "identity" : "gelu",
      eps: ckpt.config.layer_norm_eps,
    },
  };
  writeBundle(bundle, outBase);
  const vocabOut = join(dirname(outBase), "vocab.txt");
  copyFileSync(join(checkpointDir, "vocab.txt"), vocabOut);
  writeExportManifest(`${outBase}.export.json`, {
    checkpoint: checkpointDir,
    checkpoint_checksums: {
      "model.safetensors": sha256File(join(checkpointDir, "model.safetensors")),
      "config.json": sha256File(join(checkpointDir, "config.json")),
      "vocab.txt": sha256File(join(checkpointDir, "vocab.txt")),
    },
    kind: "head",
    activation: String(bundle.metadata.activation),
    eps: Number(bundle.metadata.eps),
    exported_at: new Date().toISOString(),
    content_checksums: {
      manifest: sha256File(`${outBase}.manifest`),
      bin: sha256File(`${outBase}.bin`),
      vocab: sha256File(vocabOut),
    },
  });
  return [`${outBase}.manifest`, `${outBase}.bin`, vocabOut];
}

const isMain = process.argv[1]?.endsWith("exportHead.js");
if (isMain) {
  const { values } = parseArgs({
    options: {
      checkpoint: { type: "string" },
      out: { type: "string" },
    },
  });
  if (!values.checkpoint || !values.out) {
    console.error("usage: exportHead --checkpoint CKPT_DIR --out OUT_BASE");
    process.exit(1);
  }
  mkdirSync(dirname(values.out), { recursive: true });
  try {
    const files = exportHead(values.checkpoint, values.out);
    console.log(`exported: ${files.join(", ")}`);
  } catch (err) {
    console.error(String(err));
    process.exit(1);
  }
}
