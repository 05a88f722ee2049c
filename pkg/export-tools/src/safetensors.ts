// Minimal safetensors reader/writer (F32 only): u64-LE header length,
// JSON header with per-tensor dtype/shape/data_offsets, then the raw data
// section. Enough to load encoder checkpoints and to build test fixtures.

import { readFileSync, writeFileSync } from "node:fs";

export interface StTensor {
  shape: number[];
  data: Float32Array;
}

export function readSafetensors(path: string): Map<string, StTensor> {
  const buf = readFileSync(path);
  const headerLen = Number(buf.readBigUInt64LE(0));
  const header = JSON.parse(buf.subarray(8, 8 + headerLen).toString("utf-8"));
  const dataStart = 8 + headerLen;
  const tensors = new Map<string, StTensor>();
  for (const [name, entry] of Object.entries<any>(header)) {
    if (name === "__metadata__") continue;
    if (entry.dtype !== "F32") {
      throw new Error(`${path}: tensor ${name} has unsupported dtype ${entry.dtype}`);
    }
    const [begin, end] = entry.data_offsets;
    const count = (end - begin) / 4;
    const data = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      data[i] = buf.readFloatLE(dataStart + begin + 4 * i);
    }
    tensors.set(name, { shape: entry.shape, data });
  }
  return tensors;
}

export function writeSafetensors(path: string, tensors: Map<string, StTensor>): void {
  const header: Record<string, object> = {};
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const name of [...tensors.keys()].sort()) {
    const t = tensors.get(name)!;
    const raw = Buffer.from(t.data.buffer, t.data.byteOffset, t.data.byteLength);
    header[name] = { dtype: "F32", shape: t.shape, data_offsets: [offset, offset + raw.length] };
    chunks.push(raw);
    offset += raw.length;
  }
  const headerBuf = Buffer.from(JSON.stringify(header), "utf-8");
  const lenBuf = Buffer.alloc(8);
  lenBuf.writeBigUInt64LE(BigInt(headerBuf.length));
  writeFileSync(path, Buffer.concat([lenBuf, headerBuf, ...chunks]));
}
