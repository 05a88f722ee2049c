// Encode a corpus or query file with a checkpoint's encoder and write the
// pooled vectors as an embedding bundle (one row per record, file order).
//
//   node dist/exportEmbeddings.js --checkpoint CKPT_DIR --texts FILE.jsonl
//        --pooling cls|mean --similarity dot|cosine --out OUT_BASE

import { mkdirSync, readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { parseArgs } from "node:util";

import { loadCheckpoint } from "./checkpoint.js";
import { Encoder, Pooling } from "./encoder.js";
import { sha256File, writeExportManifest } from "./manifest.js";
import { tensor, writeBundle, writeIdsSidecar } from "./tensors.js";

export interface TextRecord {
  id: string;
  text: string;
}

export function readTexts(path: string): TextRecord[] {
  const records: TextRecord[] = [];
  const seen = new Set<string>();
  const lines = readFileSync(path, "utf-8").split("\n");
  lines.forEach((line, i) => {
    if (line === "" && i === lines.length - 1) return;
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`${path}:${i + 1}: malformed line: ${err}`);
    }
    if (typeof obj.id !== "string" || typeof obj.text !== "string") {
      throw new Error(`${path}:${i + 1}: records need string id and text fields`);
    }
    if (seen.has(obj.id)) throw new Error(`${path}:${i + 1}: duplicate id ${obj.id}`);
    seen.add(obj.id);
    const text = typeof obj.title === "string" && obj.title !== ""
      ? `${obj.title} ${obj.text}`
      : obj.text;
    records.push({ id: obj.id, text });
  });
  return records;
}

export function exportEmbeddings(
  checkpointDir: string,
  textsPath: string,
  pooling: Pooling,
  similarity: "dot" | "cosine",
  outBase: string,
): { ids: string[]; dim: number } {
  const records = readTexts(textsPath);
  if (records.length === 0) throw new Error(`${textsPath}: no records to encode`);
  const ckpt = loadCheckpoint(checkpointDir);
  const encoder = new Encoder(ckpt);
  const d = ckpt.config.hidden_size;
  const vectors = new Float32Array(records.length * d);
  records.forEach((rec, row) => {
    const v = encoder.encode(rec.text, pooling);
    for (let j = 0; j < d; j++) vectors[row * d + j] = v[j];
  });
  writeBundle(
    {
      tensors: new Map([["vectors", tensor([records.length, d], vectors)]]),
      metadata: { similarity },
    },
    outBase,
  );
  writeIdsSidecar(outBase, records.map((r) => r.id));
  writeExportManifest(`${outBase}.export.json`, {
    checkpoint: checkpointDir,
    checkpoint_checksums: {
      "model.safetensors": sha256File(join(checkpointDir, "model.safetensors")),
    },
    kind: "embeddings",
    pooling,
    similarity,
    activation: ckpt.config.hidden_act,
    eps: ckpt.config.layer_norm_eps,
    exported_at: new Date().toISOString(),
    content_checksums: {
      manifest: sha256File(`${outBase}.manifest`),
      bin: sha256File(`${outBase}.bin`),
      ids: sha256File(`${outBase}.ids`),
    },
  });
  return { ids: records.map((r) => r.id), dim: d };
}

const isMain = process.argv[1]?.endsWith("exportEmbeddings.js");
if (isMain) {
  const { values } = parseArgs({
    options: {
      checkpoint: { type: "string" },
      texts: { type: "string" },
      pooling: { type: "string", default: "cls" },
      similarity: { type: "string", default: "dot" },
      out: { type: "string" },
    },
  });
  if (!values.checkpoint || !values.texts || !values.out) {
    console.error(
      "usage: exportEmbeddings --checkpoint DIR --texts FILE --pooling cls|mean " +
        "--similarity dot|cosine --out OUT_BASE",
    );
    process.exit(1);
  }
  if (values.pooling !== "cls" && values.pooling !== "mean") {
    console.error(`unknown pooling ${values.pooling}`);
    process.exit(1);
  }
  if (values.similarity !== "dot" && values.similarity !== "cosine") {
    console.error(`unknown similarity ${values.similarity}`);
    process.exit(1);
  }
  mkdirSync(dirname(values.out), { recursive: true });
  try {
    const { ids, dim } = exportEmbeddings(
      values.checkpoint, values.texts, values.pooling as Pooling,
      values.similarity as "dot" | "cosine", values.out,
    );
    console.log(`encoded ${ids.length} records at d=${dim} -> ${values.out}`);
  } catch (err) {
    console.error(String(err));
    process.exit(1);
  }
}
