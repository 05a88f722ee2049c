// Synthetic checkpoints for tests and offline development: a tiny random
// BERT-shaped model with tied decoder/word embeddings, written in the real
// checkpoint layout (config.json + model.safetensors + vocab.txt).

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { CheckpointConfig } from "./checkpoint.js";
import { gaussian, rng } from "./math.js";
import { readSafetensors, StTensor, writeSafetensors } from "./safetensors.js";

export const FIXTURE_CONFIG: CheckpointConfig = {
  hidden_size: 32,
  num_hidden_layers: 2,
  num_attention_heads: 4,
  intermediate_size: 64,
  vocab_size: 64,
  max_position_embeddings: 48,
  type_vocab_size: 2,
  layer_norm_eps: 1e-12,
  hidden_act: "gelu",
};

export function fixtureVocab(size: number): string[] {
  const vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "re", "##ba", "the"];
  for (let i = vocab.length; i < size; i++) vocab.push(`word${i.toString().padStart(2, "0")}`);
  return vocab.slice(0, size);
}

export function makeFixtureCheckpoint(
  dir: string,
  seed = 11,
  config: CheckpointConfig = FIXTURE_CONFIG,
): void {
  mkdirSync(dir, { recursive: true });
  const gauss = gaussian(rng(seed));
  const d = config.hidden_size;
  const tensors = new Map<string, StTensor>();

  const fill = (shape: number[], scale: number, shift = 0): StTensor => {
    const n = shape.reduce((a, b) => a * b, 1);
    const data = new Float32Array(n);
    for (let i = 0; i < n; i++) data[i] = shift + scale * gauss();
    return { shape, data };
  };

  const wordEmb = fill([config.vocab_size, d], 0.5);
  tensors.set("bert.embeddings.word_embeddings.weight", wordEmb);
  tensors.set("bert.embeddings.position_embeddings.weight",
              fill([config.max_position_embeddings, d], 0.1));
  tensors.set("bert.embeddings.token_type_embeddings.weight",
              fill([config.type_vocab_size, d], 0.1));
  tensors.set("bert.embeddings.LayerNorm.weight", fill([d], 0.1, 1.0));
  tensors.set("bert.embeddings.LayerNorm.bias", fill([d], 0.05));

  const attnScale = 0.3 / Math.sqrt(d);
  for (let layer = 0; layer < config.num_hidden_layers; layer++) {
    const p = `bert.encoder.layer.${layer}`;
    for (const part of ["query", "key", "value"]) {
      tensors.set(`${p}.attention.self.${part}.weight`, fill([d, d], attnScale));
      tensors.set(`${p}.attention.self.${part}.bias`, fill([d], 0.02));
    }
    tensors.set(`${p}.attention.output.dense.weight`, fill([d, d], attnScale));
    tensors.set(`${p}.attention.output.dense.bias`, fill([d], 0.02));
    tensors.set(`${p}.attention.output.LayerNorm.weight`, fill([d], 0.1, 1.0));
    tensors.set(`${p}.attention.output.LayerNorm.bias`, fill([d], 0.05));
    tensors.set(`${p}.intermediate.dense.weight`,
                fill([config.intermediate_size, d], attnScale));
    tensors.set(`${p}.intermediate.dense.bias`, fill([config.intermediate_size], 0.02));
    tensors.set(`${p}.output.dense.weight`, fill([d, config.intermediate_size], attnScale));
    tensors.set(`${p}.output.dense.bias`, fill([d], 0.02));
    tensors.set(`${p}.output.LayerNorm.weight`, fill([d], 0.1, 1.0));
    tensors.set(`${p}.output.LayerNorm.bias`, fill([d], 0.05));
  }

  tensors.set("cls.predictions.transform.dense.weight", fill([d, d], 1.0 / Math.sqrt(d)));
  tensors.set("cls.predictions.transform.dense.bias", fill([d], 0.02));
  tensors.set("cls.predictions.transform.LayerNorm.weight", fill([d], 0.1, 1.0));
  tensors.set("cls.predictions.transform.LayerNorm.bias", fill([d], 0.05));
  // tied decoder: reuse the word-embedding values
  tensors.set("cls.predictions.decoder.weight",
              { shape: [config.vocab_size, d], data: Float32Array.from(wordEmb.data) });
  tensors.set("cls.predictions.bias", fill([config.vocab_size], 0.05));

  writeSafetensors(join(dir, "model.safetensors"), tensors);
  writeFileSync(join(dir, "config.json"), JSON.stringify(config, null, 2) + "\n");
  writeFileSync(join(dir, "vocab.txt"),
                fixtureVocab(config.vocab_size).map((t) => t + "\n").join(""));
}

export function makeHeadlessCheckpoint(dir: string, seed = 12): void {
  // encoder weights only: exporting a head from this must fail loudly
  makeFixtureCheckpoint(dir, seed);
  const path = join(dir, "model.safetensors");
  const tensors = readSafetensors(path);
  for (const name of [...tensors.keys()]) {
    if (name.startsWith("cls.")) tensors.delete(name);
  }
  writeSafetensors(path, tensors);
}
