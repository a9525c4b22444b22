/** Shared test utilities: a minimal PNG writer and a line-protocol client. */

import { Buffer } from "node:buffer";
import { type ChildProcess } from "node:child_process";
import { once } from "node:events";
import * as readline from "node:readline";
import { crc32, deflateSync } from "node:zlib";

const chunk = (kind: string, data: Buffer): Buffer => {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(data.length, 0);
  head.write(kind, 4, "latin1");
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(Buffer.concat([head.subarray(4), data])) >>> 0, 0);
  return Buffer.concat([head, data, crc]);
};

/**
 * Write an 8-bit RGB PNG. `filters[y]` picks the filter byte per row
 * (default 0); filtered bytes are computed so decoders must undo them.
 */
export const writeRgbPng = (
  height: number,
  width: number,
  pixels: Uint8Array,
  filters?: number[],
): Buffer => {
  const stride = width * 3;
  const raw = Buffer.alloc(height * (stride + 1));
  for (let y = 0; y < height; y++) {
    const filter = filters?.[y] ?? 0;
    raw[y * (stride + 1)] = filter;
    for (let x = 0; x < stride; x++) {
      const value = pixels[y * stride + x];
      const left = x >= 3 ? pixels[y * stride + x - 3] : 0;
      const up = y > 0 ? pixels[(y - 1) * stride + x] : 0;
      const upLeft = y > 0 && x >= 3 ? pixels[(y - 1) * stride + x - 3] : 0;
      let encoded: number;
      switch (filter) {
        case 0:
          encoded = value;
          break;
        case 1:
          encoded = value - left;
          break;
        case 2:
          encoded = value - up;
          break;
        case 3:
          encoded = value - ((left + up) >> 1);
          break;
        case 4: {
          const p = left + up - upLeft;
          const pa = Math.abs(p - left);
          const pb = Math.abs(p - up);
          const pc = Math.abs(p - upLeft);
          const predictor = pa <= pb && pa <= pc ? left : pb <= pc ? up : upLeft;
          encoded = value - predictor;
          break;
        }
        default:
          throw new Error(`bad test filter ${filter}`);
      }
      raw[y * (stride + 1) + 1 + x] = encoded & 0xff;
    }
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 2; // rgb
  return Buffer.concat([
    Buffer.from([137, 80, 78, 71, 13, 10, 26, 10]),
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(raw)),
    chunk("IEND", Buffer.alloc(0)),
  ]);
};

/** Collect `count` stdout lines from a child process. */
export const collectLines = async (child: ChildProcess, count: number): Promise<string[]> => {
  const lines: string[] = [];
  const reader = readline.createInterface({ input: child.stdout! });
  for await (const line of reader) {
    lines.push(line);
    if (lines.length >= count) {
      reader.close();
      break;
    }
  }
  return lines;
};

export const waitForExit = async (child: ChildProcess): Promise<number | null> => {
  if (child.exitCode !== null) {
    return child.exitCode;
  }
  const [code] = (await once(child, "exit")) as [number | null];
  return code;
};
