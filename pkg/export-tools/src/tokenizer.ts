// Greedy longest-match wordpiece tokenization, mirroring the runtime's
// rules: lowercase, whitespace split with punctuation as its own word,
// "##" continuations, unknown fallback for unmatched words.

const MAX_WORD_CHARS = 100;

export class WordpieceTokenizer {
  readonly tokenToId = new Map<string, number>();
  readonly unkId: number;
  readonly clsId: number | undefined;
  readonly sepId: number | undefined;

  constructor(readonly vocab: string[]) {
    vocab.forEach((tok, i) => {
      if (this.tokenToId.has(tok)) throw new Error(`duplicate vocab token ${tok}`);
      this.tokenToId.set(tok, i);
    });
    const unk = this.tokenToId.get("[UNK]");
    if (unk === undefined) throw new Error("vocabulary must contain [UNK]");
    this.unkId = unk;
    this.clsId = this.tokenToId.get("[CLS]");
    this.sepId = this.tokenToId.get("[SEP]");
  }

  words(text: string): string[] {
    const out: string[] = [];
    let current = "";
    for (const ch of text.toLowerCase()) {
      if (/\s/.test(ch)) {
        if (current) out.push(current);
        current = "";
      } else if (isPunct(ch)) {
        if (current) out.push(current);
        current = "";
        out.push(ch);
      } else {
        current += ch;
      }
    }
    if (current) out.push(current);
    return out;
  }

  wordpiece(word: string): number[] {
    if (word.length > MAX_WORD_CHARS) return [this.unkId];
    const pieces: number[] = [];
    let start = 0;
    while (start < word.length) {
      let end = word.length;
      let found: number | undefined;
      while (start < end) {
        const piece = (start > 0 ? "##" : "") + word.slice(start, end);
        found = this.tokenToId.get(piece);
        if (found !== undefined) break;
        end -= 1;
      }
      if (found === undefined) return [this.unkId];
      pieces.push(found);
      start = end;
    }
    return pieces;
  }

  tokenize(text: string): number[] {
    return this.words(text).flatMap((w) => this.wordpiece(w));
  }

  // [CLS] tokens... [SEP], truncated to maxLen
  encode(text: string, maxLen: number): number[] {
    if (this.clsId === undefined || this.sepId === undefined) {
      throw new Error("vocabulary must contain [CLS] and [SEP] to encode sequences");
    }
    const body = this.tokenize(text).slice(0, Math.max(0, maxLen - 2));
    return [this.clsId, ...body, this.sepId];
  }
}

function isPunct(ch: string): boolean {
  return /[\p{P}\p{S}]/u.test(ch);
}
