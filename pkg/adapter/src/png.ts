/**
 * Minimal PNG reader for store export.
 *
 * Supports the subset conforming inputs use: 8-bit depth, non-interlaced,
 * color types gray (0), RGB (2), palette (3), gray+alpha (4), RGBA (6).
 * Output is the canonical H×W×3 tensor with values p/127.5 - 1 as float32,
 * byte-compatible with the host's image loader: gray replicates to three
 * channels, alpha is dropped, palette entries expand through PLTE.
 */

import { inflateSync } from "node:zlib";

const PNG_SIGNATURE = Buffer.from([137, 80, 78, 71, 13, 10, 26, 10]);

const CHANNELS_BY_COLOR_TYPE: Record<number, number> = {
  0: 1, // gray
  2: 3, // rgb
  3: 1, // palette index
  4: 2, // gray + alpha
  6: 4, // rgba
};

export interface DecodedImage {
  height: number;
  width: number;
  /** H×W×3 row-major float32, values in [-1, 1] */
  tensor: Float32Array;
}

const paeth = (a: number, b: number, c: number): number => {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
};

const unfilter = (
  raw: Buffer,
  height: number,
  width: number,
  bytesPerPixel: number,
): Buffer => {
  const stride = width * bytesPerPixel;
  const out = Buffer.alloc(height * stride);
  let offset = 0;
  for (let y = 0; y < height; y++) {
    const filter = raw[offset];
    offset += 1;
    const row = y * stride;
    const prev = row - stride;
    for (let x = 0; x < stride; x++) {
      const value = raw[offset + x];
      const left = x >= bytesPerPixel ? out[row + x - bytesPerPixel] : 0;
      const up = y > 0 ? out[prev + x] : 0;
      const upLeft = y > 0 && x >= bytesPerPixel ? out[prev + x - bytesPerPixel] : 0;
      let decoded: number;
      switch (filter) {
        case 0:
          decoded = value;
          break;
        case 1:
          decoded = value + left;
          break;
        case 2:
          decoded = value + up;
          break;
        case 3:
          decoded = value + ((left + up) >> 1);
          break;
        case 4:
          decoded = value + paeth(left, up, upLeft);
          break;
        default:
          throw new Error(`unsupported PNG filter type ${filter}`);
      }
      out[row + x] = decoded & 0xff;
    }
    offset += stride;
  }
  return out;
};

export const readPng = (file: Buffer): DecodedImage => {
  if (!file.subarray(0, 8).equals(PNG_SIGNATURE)) {
    throw new Error("not a PNG file");
  }
  let offset = 8;
  let header: { height: number; width: number; colorType: number } | null = null;
  let palette: Buffer | null = null;
  const idat: Buffer[] = [];
  while (offset + 8 <= file.length) {
    const length = file.readUInt32BE(offset);
    const kind = file.toString("latin1", offset + 4, offset + 8);
    const data = file.subarray(offset + 8, offset + 8 + length);
    offset += 12 + length; // length + type + payload + crc
    if (kind === "IHDR") {
      const bitDepth = data[8];
      const colorType = data[9];
      const interlace = data[12];
      if (bitDepth !== 8) {
        throw new Error(`unsupported PNG bit depth ${bitDepth}`);
      }
      if (!(colorType in CHANNELS_BY_COLOR_TYPE)) {
        throw new Error(`unsupported PNG color type ${colorType}`);
      }
      if (interlace !== 0) {
        throw new Error("interlaced PNGs are not supported");
      }
      header = {
        width: data.readUInt32BE(0),
        height: data.readUInt32BE(4),
        colorType,
      };
    } else if (kind === "PLTE") {
      palette = Buffer.from(data);
    } else if (kind === "IDAT") {
      idat.push(data);
    } else if (kind === "IEND") {
      break;
    }
  }
  if (header === null) {
    throw new Error("PNG has no IHDR chunk");
  }
  const { height, width, colorType } = header;
  const channels = CHANNELS_BY_COLOR_TYPE[colorType];
  const pixels = unfilter(inflateSync(Buffer.concat(idat)), height, width, channels);

  const rgb = (index: number): [number, number, number] => {
    const base = index * channels;
    switch (colorType) {
      case 0:
        return [pixels[base], pixels[base], pixels[base]];
      case 2:
        return [pixels[base], pixels[base + 1], pixels[base + 2]];
      case 3: {
        if (palette === null) {
          throw new Error("palette PNG has no PLTE chunk");
        }
        const entry = pixels[base] * 3;
        return [palette[entry], palette[entry + 1], palette[entry + 2]];
      }
      case 4:
        return [pixels[base], pixels[base], pixels[base]];
      default:
        return [pixels[base], pixels[base + 1], pixels[base + 2]];
    }
  };

  const tensor = new Float32Array(height * width * 3);
  for (let i = 0; i < height * width; i++) {
    const [r, g, b] = rgb(i);
    tensor[i * 3] = r / 127.5 - 1.0;
    tensor[i * 3 + 1] = g / 127.5 - 1.0;
    tensor[i * 3 + 2] = b / 127.5 - 1.0;
  }
  return { height, width, tensor };
};
