// A checkpoint is a directory holding config.json, model.safetensors and
// vocab.txt, with tensors named in the conventional encoder layout
// (bert.embeddings..., bert.encoder.layer.N..., cls.predictions...).

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { readSafetensors, StTensor } from "./safetensors.js";

export interface CheckpointConfig {
  hidden_size: number;
  num_hidden_layers: number;
  num_attention_heads: number;
  intermediate_size: number;
  vocab_size: number;
  max_position_embeddings: number;
  type_vocab_size: number;
  layer_norm_eps: number;
  hidden_act: string;
}

export interface Checkpoint {
  dir: string;
  config: CheckpointConfig;
  tensors: Map<string, StTensor>;
  vocab: string[];
}

export const HEAD_TENSOR_MAP: Record<string, string> = {
  "transform.weight": "cls.predictions.transform.dense.weight",
  "transform.bias": "cls.predictions.transform.dense.bias",
  "layernorm.gamma": "cls.predictions.transform.LayerNorm.weight",
  "layernorm.beta": "cls.predictions.transform.LayerNorm.bias",
  "decoder.weight": "cls.predictions.decoder.weight",
  "decoder.bias": "cls.predictions.bias",
};

export function loadCheckpoint(dir: string): Checkpoint {
  const config = JSON.parse(readFileSync(join(dir, "config.json"), "utf-8"));
  const tensors = readSafetensors(join(dir, "model.safetensors"));
  const vocab = readFileSync(join(dir, "vocab.txt"), "utf-8")
    .split("\n")
    .filter((line, i, all) => i < all.length - 1 || line !== "");
  if (vocab.length !== config.vocab_size) {
    throw new Error(
      `${dir}: vocab.txt has ${vocab.length} tokens, config says ${config.vocab_size}`,
    );
  }
  return { dir, config, tensors, vocab };
}

export function requireTensor(ckpt: Checkpoint, name: string): StTensor {
  const t = ckpt.tensors.get(name);
  if (!t) throw new Error(`${ckpt.dir}: checkpoint is missing tensor ${name}`);
  return t;
}

export function missingHeadTensors(ckpt: Checkpoint): string[] {
  return Object.values(HEAD_TENSOR_MAP).filter((name) => !ckpt.tensors.has(name));
}
