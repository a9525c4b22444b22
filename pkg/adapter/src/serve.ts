/**
 * Serving loop: handshake, then one response per request line.
 *
 * Responses may leave out of order (ids disambiguate); a per-request
 * failure produces an error response and never kills the process. The
 * scramble option buffers completed responses and flushes them in reverse
 * order so hosts can prove their id matching works.
 */

import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";

import type { EmbeddingModel } from "./model.js";
import {
  EmbedResponse,
  PROTOCOL_VERSION,
  decodeFloat32,
  encodeFloat32,
  parseRequest,
} from "./protocol.js";

export interface ServeOptions {
  scramble?: number;
}

export const serve = async (
  model: EmbeddingModel,
  input: Readable,
  output: Writable,
  options: ServeOptions = {},
): Promise<void> => {
  const scramble = Math.max(1, options.scramble ?? 1);
  output.write(JSON.stringify({ protocol: PROTOCOL_VERSION, dim: model.dim }) + "\n");

  let buffered: EmbedResponse[] = [];
  const flush = () => {
    for (const response of buffered.reverse()) {
      output.write(JSON.stringify(response) + "\n");
    }
    buffered = [];
  };
  const emit = (response: EmbedResponse) => {
    buffered.push(response);
    if (buffered.length >= scramble) {
      flush();
    }
  };

  const handle = async (line: string): Promise<EmbedResponse> => {
    let id: number | null = null;
    try {
      const request = parseRequest(line);
      id = request.id;
      const pixels = decodeFloat32(request.pixels);
      const expected = request.height * request.width * request.channels;
      if (pixels.length !== expected) {
        throw new Error(
          `pixel payload has ${pixels.length} values, expected ${expected}`,
        );
      }
      const embedding = await model.embed(
        pixels,
        request.height,
        request.width,
        request.channels,
      );
      return { id, embedding: encodeFloat32(embedding) };
    } catch (error) {
      return { id, error: error instanceof Error ? error.message : String(error) };
    }
  };

  for await (const line of readline.createInterface({ input })) {
    if (line.trim().length === 0) {
      continue;
    }
    emit(await handle(line));
  }
  flush();
};
