// Small dense-math helpers on Float64Array plus an erf good to ~1.2e-7
// relative (Numerical-Recipes erfc approximation); the downstream parity
// budget against the reference runtime is 1e-4 on logits, so the activation
// error has two orders of magnitude of headroom.

export type Vec = Float64Array;

export function erf(x: number): number {
  const z = Math.abs(x);
  const t = 1.0 / (1.0 + 0.5 * z);
  const tau =
    t *
    Math.exp(
      -z * z -
        1.26551223 +
        t *
          (1.00002368 +
            t *
              (0.37409196 +
                t *
                  (0.09678418 +
                    t *
                      (-0.18628806 +
                        t *
                          (0.27886807 +
                            t *
                              (-1.13520398 +
                                t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))),
    );
  const erfc = x >= 0 ? tau : 2.0 - tau;
  return 1.0 - erfc;
}

export function gelu(x: number): number {
  return x * 0.5 * (1.0 + erf(x / Math.SQRT2));
}

export function zeros(n: number): Vec {
  return new Float64Array(n);
}

// y = W x + b with W stored row-major [out, in] (the Linear convention)
export function affine(w: Vec, rows: number, cols: number, x: Vec, b?: Vec): Vec {
  const y = new Float64Array(rows);
  for (let i = 0; i < rows; i++) {
    let acc = b ? b[i] : 0;
    const base = i * cols;
    for (let j = 0; j < cols; j++) acc += w[base + j] * x[j];
    y[i] = acc;
  }
  return y;
}

export function layerNorm(x: Vec, gamma: Vec, beta: Vec, eps: number): Vec {
  const n = x.length;
  let mean = 0;
  for (let i = 0; i < n; i++) mean += x[i];
  mean /= n;
  let variance = 0;
  for (let i = 0; i < n; i++) variance += (x[i] - mean) * (x[i] - mean);
  variance /= n;
  const inv = 1.0 / Math.sqrt(variance + eps);
  const y = new Float64Array(n);
  for (let i = 0; i < n; i++) y[i] = gamma[i] * (x[i] - mean) * inv + beta[i];
  return y;
}

export function softmaxInPlace(x: Vec): void {
  let max = -Infinity;
  for (const v of x) if (v > max) max = v;
  let sum = 0;
  for (let i = 0; i < x.length; i++) {
    x[i] = Math.exp(x[i] - max);
    sum += x[i];
  }
  for (let i = 0; i < x.length; i++) x[i] /= sum;
}

export function addInPlace(a: Vec, b: Vec): void {
  for (let i = 0; i < a.length; i++) a[i] += b[i];
}

// deterministic small PRNG (mulberry32) for fixtures and sample vectors
export function rng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function gaussian(next: () => number): () => number {
  // Box-Muller on the uniform stream
  let spare: number | null = null;
  return () => {
    if (spare !== null) {
      const v = spare;
      spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    do {
      u = next();
    } while (u === 0);
    v = next();
    const r = Math.sqrt(-2.0 * Math.log(u));
    spare = r * Math.sin(2 * Math.PI * v);
    return r * Math.cos(2 * Math.PI * v);
  };
}
