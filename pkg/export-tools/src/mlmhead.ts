// Reference MLM-head forward (logits only): dense transform -> activation
// -> LayerNorm -> decoder. This is the framework side of the numerical
// cross-check against the vocablens runtime.

import { Checkpoint, HEAD_TENSOR_MAP, requireTensor } from "./checkpoint.js";
import { affine, gelu, layerNorm, Vec } from "./math.js";

export interface HeadWeights {
  w: Vec;        // (d, d) row-major
  b: Vec;
  gamma: Vec;
  beta: Vec;
  v: Vec;        // (|V|, d) row-major
  bOut: Vec;
  d: number;
  vocabSize: number;
  eps: number;
  activation: "gelu" | "identity";
}

export function headFromCheckpoint(ckpt: Checkpoint): HeadWeights {
  const d = ckpt.config.hidden_size;
  const vocabSize = ckpt.config.vocab_size;
  const get = (bundleName: string) =>
    Float64Array.from(requireTensor(ckpt, HEAD_TENSOR_MAP[bundleName]).data);
  return {
    w: get("transform.weight"),
    b: get("transform.bias"),
    gamma: get("layernorm.gamma"),
    beta: get("layernorm.beta"),
    v: get("decoder.weight"),
    bOut: get("decoder.bias"),
    d,
    vocabSize,
    eps: ckpt.config.layer_norm_eps,
    activation: ckpt.config.hidden_act === "identity" ? "identity" : "gelu",
  };
}

export function headLogits(head: HeadWeights, h: Vec): Vec {
  const a = affine(head.w, head.d, head.d, h, head.b);
  if (head.activation === "gelu") {
    for (let i = 0; i < a.length; i++) a[i] = gelu(a[i]);
  }
  const g = layerNorm(a, head.gamma, head.beta, head.eps);
  return affine(head.v, head.vocabSize, head.d, g, head.bOut);
}
