import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { loadCheckpoint } from "../src/checkpoint.js";
import { Encoder } from "../src/encoder.js";
import { exportEmbeddings, readTexts } from "../src/exportEmbeddings.js";
import { exportHead } from "../src/exportHead.js";
import { makeFixtureCheckpoint, makeHeadlessCheckpoint } from "../src/fixtures.js";
import { sha256File } from "../src/manifest.js";
import { readBundle } from "../src/tensors.js";

const tmp = () => mkdtempSync(join(tmpdir(), "export-tools-"));

let ckptDir: string;

beforeAll(() => {
  ckptDir = join(tmp(), "ckpt");
  makeFixtureCheckpoint(ckptDir, 11);
});

function writeTexts(path: string, rows: Array<Record<string, unknown>>): void {
  writeFileSync(path, rows.map((r) => JSON.stringify(r) + "\n").join(""));
}

describe("head export", () => {
  it("emits the exact bundle tensor names and shapes", () => {
    const out = join(tmp(), "head");
    exportHead(ckptDir, out);
    const bundle = readBundle(out);
    const d = 32;
    expect(bundle.tensors.get("transform.weight")!.shape).toEqual([d, d]);
    expect(bundle.tensors.get("transform.bias")!.shape).toEqual([d]);
    expect(bundle.tensors.get("layernorm.gamma")!.shape).toEqual([d]);
    expect(bundle.tensors.get("layernorm.beta")!.shape).toEqual([d]);
    expect(bundle.tensors.get("decoder.weight")!.shape).toEqual([64, d]);
    expect(bundle.tensors.get("decoder.bias")!.shape).toEqual([64]);
    expect(bundle.metadata.activation).toBe("gelu");
    expect(bundle.metadata.eps).toBe(1e-12);
  });

  it("re-exports with identical checksums", () => {
    const a = join(tmp(), "a");
    const b = join(tmp(), "b");
    exportHead(ckptDir, a);
    exportHead(ckptDir, b);
    expect(sha256File(a + ".bin")).toBe(sha256File(b + ".bin"));
    expect(sha256File(a + ".manifest")).toBe(sha256File(b + ".manifest"));
  });

  it("names the absent tensors for a headless checkpoint", () => {
    const headless = join(tmp(), "headless");
    makeHeadlessCheckpoint(headless, 12);
    expect(() => exportHead(headless, join(tmp(), "x"))).toThrow(
      /cls\.predictions\.transform\.dense\.weight/,
    );
  });
});

describe("embedding export", () => {
  it("keeps record order and matches the head dimension", () => {
    const texts = join(tmp(), "texts.jsonl");
    writeTexts(texts, [
      { id: "p1", title: "", text: "great lakes" },
      { id: "p2", title: "", text: "re ba" },
      { id: "p3", title: "t", text: "word10 word11" },
    ]);
    const out = join(tmp(), "emb");
    const { ids, dim } = exportEmbeddings(ckptDir, texts, "cls", "dot", out);
    expect(ids).toEqual(["p1", "p2", "p3"]);
    expect(dim).toBe(32);
    const bundle = readBundle(out);
    expect(bundle.tensors.get("vectors")!.shape).toEqual([3, 32]);
    expect(bundle.metadata.similarity).toBe("dot");
  });

  it("encodes duplicate texts identically", () => {
    const ckpt = loadCheckpoint(ckptDir);
    const enc = new Encoder(ckpt);
    const a = enc.encode("great lakes word10", "mean");
    const b = enc.encode("great lakes word10", "mean");
    expect([...a]).toEqual([...b]);
  });

  it("cls and mean pooling differ", () => {
    const enc = new Encoder(loadCheckpoint(ckptDir));
    const cls = enc.encode("great lakes word10", "cls");
    const mean = enc.encode("great lakes word10", "mean");
    let diff = 0;
    for (let i = 0; i < cls.length; i++) diff = Math.max(diff, Math.abs(cls[i] - mean[i]));
    expect(diff).toBeGreaterThan(1e-6);
  });

  it("matches the recorded reference vector for the pinned fixture", () => {
    // frozen from this generator at seed 11; guards encoder regressions
    const enc = new Encoder(loadCheckpoint(ckptDir));
    const v = enc.encode("great lakes", "cls");
    const recorded = RECORDED_CLS_GREAT_LAKES;
    expect(v.length).toBe(recorded.length);
    for (let i = 0; i < v.length; i++) {
      expect(Math.abs(v[i] - recorded[i])).toBeLessThan(1e-4);
    }
  });

  it("rejects duplicate ids and malformed lines", () => {
    const bad = join(tmp(), "bad.jsonl");
    writeFileSync(bad, '{"id": "a", "text": "x"}\n{"id": "a", "text": "y"}\n');
    expect(() => readTexts(bad)).toThrow(/duplicate id/);
    writeFileSync(bad, "not json\n");
    expect(() => readTexts(bad)).toThrow(/malformed/);
  });
});

// filled in by scripts/freeze_reference.mjs; see test setup notes
import { RECORDED_CLS_GREAT_LAKES } from "./recorded_reference.js";
