// Sequential BERT-style encoder forward pass (eval mode) over one text at a
// time: embedding sum + LayerNorm, then the standard self-attention /
// feed-forward blocks with post-LN residuals, then CLS or mean pooling.
// Slow and simple on purpose: these exports run once, offline.

import { Checkpoint, requireTensor } from "./checkpoint.js";
import { addInPlace, affine, gelu, layerNorm, softmaxInPlace, Vec } from "./math.js";
import { WordpieceTokenizer } from "./tokenizer.js";

export type Pooling = "cls" | "mean";

function asF64(data: Float32Array): Vec {
  return Float64Array.from(data);
}

export class Encoder {
  private readonly tok: WordpieceTokenizer;
  private readonly d: number;
  private readonly eps: number;

  constructor(private readonly ckpt: Checkpoint) {
    this.tok = new WordpieceTokenizer(ckpt.vocab);
    this.d = ckpt.config.hidden_size;
    this.eps = ckpt.config.layer_norm_eps;
  }

  private t(name: string): Vec {
    return asF64(requireTensor(this.ckpt, name).data);
  }

  encode(text: string, pooling: Pooling): Vec {
    const cfg = this.ckpt.config;
    const d = this.d;
    const ids = this.tok.encode(text, cfg.max_position_embeddings);
    const wordEmb = this.t("bert.embeddings.word_embeddings.weight");
    const posEmb = this.t("bert.embeddings.position_embeddings.weight");
    const typeEmb = this.t("bert.embeddings.token_type_embeddings.weight");
    const embGamma = this.t("bert.embeddings.LayerNorm.weight");
    const embBeta = this.t("bert.embeddings.LayerNorm.bias");

    let states: Vec[] = ids.map((id, pos) => {
      const x = new Float64Array(d);
      for (let j = 0; j < d; j++) {
        x[j] = wordEmb[id * d + j] + posEmb[pos * d + j] + typeEmb[j];
      }
      return layerNorm(x, embGamma, embBeta, this.eps);
    });

    for (let layer = 0; layer < cfg.num_hidden_layers; layer++) {
      states = this.block(states, layer);
    }

    if (pooling === "cls") return states[0];
    const mean = new Float64Array(d);
    for (const s of states) addInPlace(mean, s);
    for (let j = 0; j < d; j++) mean[j] /= states.length;
    return mean;
  }

  private block(states: Vec[], layer: number): Vec[] {
    const cfg = this.ckpt.config;
    const d = this.d;
    const heads = cfg.num_attention_heads;
    const dh = d / heads;
    const p = `bert.encoder.layer.${layer}`;
    const wq = this.t(`${p}.attention.self.query.weight`);
    const bq = this.t(`${p}.attention.self.query.bias`);
    const wk = this.t(`${p}.attention.self.key.weight`);
    const bk = this.t(`${p}.attention.self.key.bias`);
    const wv = this.t(`${p}.attention.self.value.weight`);
    const bv = this.t(`${p}.attention.self.value.bias`);

    const q = states.map((x) => affine(wq, d, d, x, bq));
    const k = states.map((x) => affine(wk, d, d, x, bk));
    const v = states.map((x) => affine(wv, d, d, x, bv));

    const n = states.length;
    const ctx = states.map(() => new Float64Array(d));
    for (let h = 0; h < heads; h++) {
      const off = h * dh;
      for (let i = 0; i < n; i++) {
        const scores = new Float64Array(n);
        for (let j = 0; j < n; j++) {
          let acc = 0;
          for (let c = 0; c < dh; c++) acc += q[i][off + c] * k[j][off + c];
          scores[j] = acc / Math.sqrt(dh);
        }
        softmaxInPlace(scores);
        for (let j = 0; j < n; j++) {
          for (let c = 0; c < dh; c++) ctx[i][off + c] += scores[j] * v[j][off + c];
        }
      }
    }

    const wo = this.t(`${p}.attention.output.dense.weight`);
    const bo = this.t(`${p}.attention.output.dense.bias`);
    const g1 = this.t(`${p}.attention.output.LayerNorm.weight`);
    const b1 = this.t(`${p}.attention.output.LayerNorm.bias`);
    const attnOut = ctx.map((c, i) => {
      const y = affine(wo, d, d, c, bo);
      addInPlace(y, states[i]);
      return layerNorm(y, g1, b1, this.eps);
    });

    const wi = this.t(`${p}.intermediate.dense.weight`);
    const bi = this.t(`${p}.intermediate.dense.bias`);
    const wo2 = this.t(`${p}.output.dense.weight`);
    const bo2 = this.t(`${p}.output.dense.bias`);
    const g2 = this.t(`${p}.output.LayerNorm.weight`);
    const b2 = this.t(`${p}.output.LayerNorm.bias`);
    return attnOut.map((x) => {
      const inter = affine(wi, this.ckpt.config.intermediate_size, d, x, bi);
      for (let j = 0; j < inter.length; j++) inter[j] = gelu(inter[j]);
      const y = affine(wo2, d, this.ckpt.config.intermediate_size, inter, bo2);
      addInPlace(y, x);
      return layerNorm(y, g2, b2, this.eps);
    });
  }
}
