/**
 * Frame decoding: uncompressed inputs only.
 *
 * Two sources are supported, both producible from anything via ffmpeg:
 *   - a .y4m clip (YUV4MPEG2; frame rate read from the header)
 *   - a directory of binary .ppm frames in name order (rate via --fps)
 */

import { promises as fs } from 'fs';
import * as path from 'path';

export interface RawFrame {
  width: number;
  height: number;
  rgb: Uint8Array; // width*height*3, row-major
}

export interface DecodedVideo {
  videoId: string;
  fps: number;
  frames: RawFrame[];
}

function clamp8(v: number): number {
  return v < 0 ? 0 : v > 255 ? 255 : Math.round(v);
}

/** BT.601 limited-range YUV to RGB. */
function yuvToRgb(y: number, u: number, v: number): [number, number, number] {
  const c = 1.164 * (y - 16);
  const d = u - 128;
  const e = v - 128;
  return [clamp8(c + 1.596 * e), clamp8(c - 0.391 * d - 0.813 * e), clamp8(c + 2.018 * d)];
}

export function parsePpm(buf: Buffer, name: string): RawFrame {
  if (buf.toString('ascii', 0, 2) !== 'P6') {
    throw new Error(`${name}: not a binary PPM (P6) file`);
  }
  // header tokens: width, height, maxval; # comments run to end of line
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (pos < buf.length && buf[pos] === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      continue;
    }
    let start = pos;
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
    if (start === pos) throw new Error(`${name}: truncated PPM header`);
    fields.push(parseInt(buf.toString('ascii', start, pos), 10));
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (!(width > 0 && height > 0)) throw new Error(`${name}: bad PPM size`);
  if (maxval !== 255) throw new Error(`${name}: only maxval 255 supported`);
  const need = width * height * 3;
  if (buf.length < pos + need) throw new Error(`${name}: truncated PPM pixel data`);
  return { width, height, rgb: new Uint8Array(buf.subarray(pos, pos + need)) };
}

export function parseY4m(buf: Buffer, name: string): { frames: RawFrame[]; fps: number } {
  const headerEnd = buf.indexOf(0x0a);
  if (headerEnd < 0) throw new Error(`${name}: missing YUV4MPEG2 header`);
  const header = buf.toString('ascii', 0, headerEnd);
  const parts = header.split(' ');
  if (parts[0] !== 'YUV4MPEG2') throw new Error(`${name}: not a YUV4MPEG2 file`);
  let width = 0;
  let height = 0;
  let fps = 0;
  let chroma = 'C420';
  for (const part of parts.slice(1)) {
    if (part.startsWith('W')) width = parseInt(part.slice(1), 10);
    else if (part.startsWith('H')) height = parseInt(part.slice(1), 10);
    else if (part.startsWith('F')) {
      const [num, den] = part.slice(1).split(':').map(Number);
      fps = num / den;
    } else if (part.startsWith('C')) chroma = part;
  }
  if (!(width > 0 && height > 0 && fps > 0)) {
    throw new Error(`${name}: header lacks W/H/F fields`);
  }
  const is444 = chroma.startsWith('C444');
  if (!is444 && !chroma.startsWith('C420')) {
    throw new Error(`${name}: unsupported chroma ${chroma} (need C420* or C444)`);
  }
  const cw = is444 ? width : width >> 1;
  const ch = is444 ? height : height >> 1;
  const frameBytes = width * height + 2 * cw * ch;

  const frames: RawFrame[] = [];
  let pos = headerEnd + 1;
  while (pos < buf.length) {
    const lineEnd = buf.indexOf(0x0a, pos);
    if (lineEnd < 0) throw new Error(`${name}: truncated FRAME marker`);
    if (buf.toString('ascii', pos, pos + 5) !== 'FRAME') {
      throw new Error(`${name}: expected FRAME marker at byte ${pos}`);
    }
    pos = lineEnd + 1;
    if (buf.length < pos + frameBytes) throw new Error(`${name}: truncated frame data`);
    const yPlane = buf.subarray(pos, pos + width * height);
    const uPlane = buf.subarray(pos + width * height, pos + width * height + cw * ch);
    const vPlane = buf.subarray(pos + width * height + cw * ch, pos + frameBytes);
    const rgb = new Uint8Array(width * height * 3);
    for (let row = 0; row < height; row++) {
      for (let col = 0; col < width; col++) {
        const ci = is444 ? row * cw + col : (row >> 1) * cw + (col >> 1);
        const [r, g, b] = yuvToRgb(yPlane[row * width + col], uPlane[ci], vPlane[ci]);
        const o = (row * width + col) * 3;
        rgb[o] = r;
        rgb[o + 1] = g;
        rgb[o + 2] = b;
      }
    }
    frames.push({ width, height, rgb });
    pos += frameBytes;
  }
  return { frames, fps };
}

export async function loadVideo(inputPath: string, fpsFlag?: number): Promise<DecodedVideo> {
  const stat = await fs.stat(inputPath);
  if (stat.isDirectory()) {
    const names = (await fs.readdir(inputPath)).filter((n) => n.endsWith('.ppm')).sort();
    if (names.length === 0) {
      throw new Error(`${inputPath}: no .ppm frames found`);
    }
    const frames: RawFrame[] = [];
    for (const n of names) {
      frames.push(parsePpm(await fs.readFile(path.join(inputPath, n)), n));
    }
    return { videoId: path.basename(inputPath), fps: fpsFlag ?? 25, frames };
  }
  if (inputPath.endsWith('.y4m')) {
    const { frames, fps } = parseY4m(await fs.readFile(inputPath), inputPath);
    return {
      videoId: path.basename(inputPath, '.y4m'),
      fps: fpsFlag ?? fps,
      frames,
    };
  }
  throw new Error(
    `${inputPath}: unsupported input; provide a .y4m clip or a directory of ` +
      `.ppm frames (ffmpeg -i video.mp4 out.y4m)`,
  );
}
