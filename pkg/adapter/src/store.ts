/**
 * Precomputed-store export.
 *
 * Store layout (shared with the host's reader): one raw little-endian
 * float32 file per image named `<sha256 of canonical pixel bytes>.f32`,
 * plus `index.json` mapping original image paths to file names. Images
 * that fail to decode are recorded under "errors" and processing
 * continues.
 */

import { readFileSync, writeFileSync, mkdirSync } from "node:fs";
import { join } from "node:path";

import type { EmbeddingModel } from "./model.js";
import { readPng } from "./png.js";
import { PROTOCOL_VERSION, tensorBytes, tensorHash } from "./protocol.js";

export interface StoreIndex {
  protocol: number;
  dim: number;
  entries: Record<string, string>;
  errors: Record<string, string>;
}

export const exportEmbeddings = async (
  model: EmbeddingModel,
  imagePaths: string[],
  outDir: string,
): Promise<StoreIndex> => {
  mkdirSync(outDir, { recursive: true });
  const index: StoreIndex = {
    protocol: PROTOCOL_VERSION,
    dim: model.dim,
    entries: {},
    errors: {},
  };
  for (const imagePath of imagePaths) {
    try {
      const { height, width, tensor } = readPng(readFileSync(imagePath));
      const embedding = await model.embed(tensor, height, width, 3);
      const fileName = `${tensorHash(tensor)}.f32`;
      writeFileSync(join(outDir, fileName), tensorBytes(embedding));
      index.entries[imagePath] = fileName;
    } catch (error) {
      index.errors[imagePath] = error instanceof Error ? error.message : String(error);
    }
  }
  writeFileSync(join(outDir, "index.json"), JSON.stringify(index, null, 2) + "\n");
  return index;
};
