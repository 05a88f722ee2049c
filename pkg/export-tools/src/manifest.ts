// Export manifests: what was exported from which checkpoint, with content
// checksums so a re-export can be verified byte for byte.

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";

export function sha256File(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

export interface ExportManifest {
  checkpoint: string;
  checkpoint_checksums: Record<string, string>;
  kind: "head" | "embeddings";
  pooling?: "cls" | "mean";
  similarity?: "dot" | "cosine";
  activation: string;
  eps: number;
  exported_at: string;
  content_checksums: Record<string, string>;
}

export function writeExportManifest(path: string, manifest: ExportManifest): void {
  writeFileSync(path, JSON.stringify(manifest, Object.keys(manifest).sort(), 2) + "\n");
}
