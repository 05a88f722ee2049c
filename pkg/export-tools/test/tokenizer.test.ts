import { describe, expect, it } from "vitest";

import { WordpieceTokenizer } from "../src/tokenizer.js";

const vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "re", "##ba", "great", "lakes", "the"];
const tok = new WordpieceTokenizer(vocab);
const id = (t: string) => vocab.indexOf(t);

describe("wordpiece tokenizer", () => {
  it("segments with ## continuations", () => {
    expect(tok.tokenize("Reba")).toEqual([id("re"), id("##ba")]);
  });

  it("splits punctuation into its own word", () => {
    expect(tok.tokenize("great lakes, lakes!")).toEqual([
      id("great"), id("lakes"), id("[UNK]"), id("lakes"), id("[UNK]"),
    ]);
  });

  it("falls back to [UNK] for unmatched words", () => {
    expect(tok.tokenize("zzqx")).toEqual([id("[UNK]")]);
    expect(tok.tokenize("")).toEqual([]);
  });

  it("wraps sequences in [CLS]/[SEP] and truncates", () => {
    const ids = tok.encode("great lakes great lakes", 5);
    expect(ids[0]).toBe(id("[CLS]"));
    expect(ids[ids.length - 1]).toBe(id("[SEP]"));
    expect(ids.length).toBe(5);
  });

  it("requires [UNK]", () => {
    expect(() => new WordpieceTokenizer(["a", "b"])).toThrow(/UNK/);
  });
});
