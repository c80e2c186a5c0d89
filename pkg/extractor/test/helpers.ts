import { promises as fs } from 'fs';
import * as os from 'os';
import * as path from 'path';
import { RawFrame } from '../src/frames.js';

export async function tmpDir(): Promise<string> {
  return fs.mkdtemp(path.join(os.tmpdir(), 'vilx-'));
}

export function solidFrame(width: number, height: number, rgb: [number, number, number]): RawFrame {
  const data = new Uint8Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    data[i * 3] = rgb[0];
    data[i * 3 + 1] = rgb[1];
    data[i * 3 + 2] = rgb[2];
  }
  return { width, height, rgb: data };
}

export function ppmBytes(frame: RawFrame): Buffer {
  const header = Buffer.from(`P6\n${frame.width} ${frame.height}\n255\n`, 'ascii');
  return Buffer.concat([header, Buffer.from(frame.rgb)]);
}

function rgbToYuv(r: number, g: number, b: number): [number, number, number] {
  const rn = r / 255;
  const gn = g / 255;
  const bn = b / 255;
  const y = 16 + 65.481 * rn + 128.553 * gn + 24.966 * bn;
  const u = 128 - 37.797 * rn - 74.203 * gn + 112.0 * bn;
  const v = 128 + 112.0 * rn - 93.786 * gn - 18.214 * bn;
  const c = (x: number) => Math.max(0, Math.min(255, Math.round(x)));
  return [c(y), c(u), c(v)];
}

/** Build a C444 YUV4MPEG2 clip from whole-frame colors. */
export function y4mBytes(
  width: number,
  height: number,
  fps: [number, number],
  colors: [number, number, number][],
): Buffer {
  const parts: Buffer[] = [
    Buffer.from(`YUV4MPEG2 W${width} H${height} F${fps[0]}:${fps[1]} Ip A1:1 C444\n`, 'ascii'),
  ];
  for (const color of colors) {
    const [y, u, v] = rgbToYuv(...color);
    parts.push(Buffer.from('FRAME\n', 'ascii'));
    const n = width * height;
    const planes = Buffer.alloc(3 * n);
    planes.fill(y, 0, n);
    planes.fill(u, n, 2 * n);
    planes.fill(v, 2 * n, 3 * n);
    parts.push(planes);
  }
  return Buffer.concat(parts);
}

export function cosine(a: Float32Array, b: Float32Array): number {
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / Math.sqrt(na * nb);
}
