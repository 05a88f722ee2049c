// Tensor bundles: <base>.manifest (JSON) + <base>.bin (raw little-endian
// float32, row-major, tensors concatenated in sorted-name order). This is
// the exchange format the vocablens runtime reads; writes here must be
// byte-for-byte reproducible.

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";

export const BUNDLE_FORMAT = "tensor-bundle-v1";

export interface Tensor {
  shape: number[];
  data: Float32Array;
}

export type Metadata = Record<string, string | number | boolean>;

export interface TensorBundle {
  tensors: Map<string, Tensor>;
  metadata: Metadata;
}

export function tensor(shape: number[], data: Float32Array | number[]): Tensor {
  const flat = data instanceof Float32Array ? data : Float32Array.from(data);
  const count = shape.reduce((a, b) => a * b, 1);
  if (shape.length === 0 || shape.some((s) => !Number.isInteger(s) || s < 1)) {
    throw new Error(`invalid tensor shape [${shape}]`);
  }
  if (flat.length !== count) {
    throw new Error(`shape [${shape}] needs ${count} values, got ${flat.length}`);
  }
  return { shape: [...shape], data: flat };
}

// JSON.stringify with sorted keys and 2-space indent to match the runtime's
// canonical manifest serialization.
export function canonicalJson(value: unknown): string {
  const sort = (v: unknown): unknown => {
    if (Array.isArray(v)) return v.map(sort);
    if (v !== null && typeof v === "object") {
      const out: Record<string, unknown> = {};
      for (const key of Object.keys(v as object).sort()) {
        out[key] = sort((v as Record<string, unknown>)[key]);
      }
      return out;
    }
    return v;
  };
  return JSON.stringify(sort(value), null, 2) + "\n";
}

export function writeBundle(bundle: TensorBundle, basePath: string): void {
  const names = [...bundle.tensors.keys()].sort();
  if (names.length === 0) throw new Error("refusing to write a bundle with no tensors");
  const entries: Record<string, object> = {};
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const name of names) {
    const t = bundle.tensors.get(name)!;
    const raw = Buffer.from(t.data.buffer, t.data.byteOffset, t.data.byteLength);
    entries[name] = {
      dtype: "float32",
      shape: t.shape,
      offset,
      nbytes: raw.length,
    };
    chunks.push(raw);
    offset += raw.length;
  }
  const manifest = {
    format: BUNDLE_FORMAT,
    byte_order: "little",
    metadata: bundle.metadata,
    tensors: entries,
  };
  mkdirSync(dirname(basePath), { recursive: true });
  writeFileSync(`${basePath}.manifest`, canonicalJson(manifest), "utf-8");
  writeFileSync(`${basePath}.bin`, Buffer.concat(chunks));
}

export function readBundle(basePath: string): TensorBundle {
  const manifest = JSON.parse(readFileSync(`${basePath}.manifest`, "utf-8"));
  if (manifest.format !== BUNDLE_FORMAT) {
    throw new Error(`${basePath}: unsupported bundle format ${manifest.format}`);
  }
  if (manifest.byte_order !== "little") {
    throw new Error(`${basePath}: unsupported byte order ${manifest.byte_order}`);
  }
  const payload = readFileSync(`${basePath}.bin`);
  const tensors = new Map<string, Tensor>();
  let total = 0;
  for (const [name, entry] of Object.entries<any>(manifest.tensors)) {
    const count = entry.shape.reduce((a: number, b: number) => a * b, 1);
    if (entry.dtype !== "float32" || entry.nbytes !== count * 4) {
      throw new Error(`tensor ${name}: dtype/size mismatch`);
    }
    if (entry.offset < 0 || entry.offset + entry.nbytes > payload.length) {
      throw new Error(`tensor ${name}: payload slice out of range`);
    }
    const data = new Float32Array(entry.nbytes / 4);
    for (let i = 0; i < data.length; i++) {
      data[i] = payload.readFloatLE(entry.offset + 4 * i);
    }
    tensors.set(name, { shape: entry.shape, data });
    total += entry.nbytes;
  }
  if (total !== payload.length) {
    throw new Error(`${basePath}.bin: ${payload.length} bytes but manifest accounts for ${total}`);
  }
  return { tensors, metadata: manifest.metadata ?? {} };
}

export function writeIdsSidecar(basePath: string, ids: string[]): void {
  writeFileSync(`${basePath}.ids`, ids.map((i) => i + "\n").join(""), "utf-8");
}
