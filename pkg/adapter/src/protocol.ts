/**
 * Wire protocol types and encoding helpers.
 *
 * Everything on the wire is newline-delimited JSON. Pixel tensors and
 * embeddings travel as base64 of row-major little-endian float32 values;
 * the same byte string, hashed with sha256, names files in the
 * precomputed store.
 */

import { createHash } from "node:crypto";

export const PROTOCOL_VERSION = 1;

export interface EmbedRequest {
  id: number;
  height: number;
  width: number;
  channels: number;
  pixels: string;
}

export interface EmbedResponse {
  id: number | null;
  embedding?: string;
  error?: string;
}

export interface Handshake {
  protocol: number;
  dim: number;
}

export const encodeFloat32 = (values: Float32Array): string => {
  const bytes = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    bytes.writeFloatLE(values[i], i * 4);
  }
  return bytes.toString("base64");
};

export const decodeFloat32 = (payload: string): Float32Array => {
  const bytes = Buffer.from(payload, "base64");
  if (bytes.length % 4 !== 0) {
    throw new Error(`payload length ${bytes.length} is not a multiple of 4`);
  }
  const values = new Float32Array(bytes.length / 4);
  for (let i = 0; i < values.length; i++) {
    values[i] = bytes.readFloatLE(i * 4);
  }
  return values;
};

/** Canonical tensor serialization: row-major little-endian float32 bytes. */
export const tensorBytes = (values: Float32Array): Buffer => {
  const bytes = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    bytes.writeFloatLE(values[i], i * 4);
  }
  return bytes;
};

/** Content hash naming a tensor's store file (sha256 hex of tensorBytes). */
export const tensorHash = (values: Float32Array): string =>
  createHash("sha256").update(tensorBytes(values)).digest("hex");

export const parseRequest = (line: string): EmbedRequest => {
  let body: unknown;
  try {
    body = JSON.parse(line);
  } catch {
    throw new Error("request is not valid JSON");
  }
  const record = body as Record<string, unknown>;
  if (typeof record.id !== "number") {
    throw new Error("request is missing a numeric id");
  }
  for (const field of ["height", "width", "channels"]) {
    if (typeof record[field] !== "number") {
      throw new Error(`request is missing numeric ${field}`);
    }
  }
  if (typeof record.pixels !== "string") {
    throw new Error("request is missing base64 pixels");
  }
  return record as unknown as EmbedRequest;
};
