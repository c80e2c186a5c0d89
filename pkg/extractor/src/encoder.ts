/**
 * Dual encoders: one embedding space shared by frames and text prompts.
 *
 * Encoders are pluggable by model identifier. The built-in family,
 * mock-dual-<D>, needs no weights: embeddings are built from SHA-256-seeded
 * unit directions, and images and text meet in the same space through a
 * small color vocabulary (a frame's mean color pulls its embedding toward
 * the direction of the matching color word). That is enough real alignment
 * for end-to-end smoke tests; production backbones (CLIP/CoCa family)
 * register here with the same interface.
 */

import { createHash } from 'crypto';
import { RawFrame } from './frames.js';

export interface DualEncoder {
  readonly id: string;
  readonly dim: number;
  encodeImage(frame: RawFrame): Float32Array;
  encodeText(prompt: string): Float32Array;
}

// color vocabulary: word -> mean-RGB anchor in [0, 1]
const COLOR_ANCHORS: Record<string, [number, number, number]> = {
  red: [1, 0, 0],
  green: [0, 1, 0],
  blue: [0, 0, 1],
  yellow: [1, 1, 0],
  cyan: [0, 1, 1],
  magenta: [1, 0, 1],
  orange: [1, 0.5, 0],
  white: [1, 1, 1],
  black: [0, 0, 0],
};

const COLOR_TEXT_WEIGHT = 2.0; // color words dominate shared template words
const COLOR_SHARPNESS = 8.0; // exp(-k * d^2) falloff around each anchor
const TEXTURE_WEIGHT = 0.25;
const GRID = 4; // texture cells per side
const LUMA_LEVELS = 8;

/** Deterministic unit vector for a seed string: SHA-256 expanded blockwise,
 * bytes centered to [-1, 1), then L2-normalized. */
export function seededDirection(seed: string, dim: number): Float64Array {
  const out = new Float64Array(dim);
  for (let block = 0; block * 32 < dim; block++) {
    const digest = createHash('sha256').update(`${seed}:${block}`).digest();
    for (let i = 0; i < 32 && block * 32 + i < dim; i++) {
      out[block * 32 + i] = (digest[i] - 127.5) / 127.5;
    }
  }
  let norm = 0;
  for (let i = 0; i < dim; i++) norm += out[i] * out[i];
  norm = Math.sqrt(norm);
  for (let i = 0; i < dim; i++) out[i] /= norm;
  return out;
}

function normalized32(acc: Float64Array): Float32Array {
  let norm = 0;
  for (let i = 0; i < acc.length; i++) norm += acc[i] * acc[i];
  norm = Math.sqrt(norm);
  if (norm === 0) {
    throw new Error('zero-norm embedding');
  }
  const out = new Float32Array(acc.length);
  for (let i = 0; i < acc.length; i++) out[i] = acc[i] / norm;
  return out;
}

function addScaled(acc: Float64Array, dir: Float64Array, w: number): void {
  for (let i = 0; i < acc.length; i++) acc[i] += w * dir[i];
}

class MockDualEncoder implements DualEncoder {
  readonly id: string;
  readonly dim: number;
  private cache = new Map<string, Float64Array>();

  constructor(dim: number) {
    this.id = `mock-dual-${dim}`;
    this.dim = dim;
  }

  private dir(seed: string): Float64Array {
    let d = this.cache.get(seed);
    if (!d) {
      d = seededDirection(seed, this.dim);
      this.cache.set(seed, d);
    }
    return d;
  }

  encodeText(prompt: string): Float32Array {
    const tokens = prompt.toLowerCase().match(/[a-z0-9]+/g) ?? [prompt];
    const acc = new Float64Array(this.dim);
    for (const tok of tokens) {
      addScaled(acc, this.dir(`tok:${tok}`), 1.0);
      if (tok in COLOR_ANCHORS) {
        addScaled(acc, this.dir(`color:${tok}`), COLOR_TEXT_WEIGHT);
      }
    }
    return normalized32(acc);
  }

  encodeImage(frame: RawFrame): Float32Array {
    const { width, height, rgb } = frame;
    const n = width * height;
    let mr = 0;
    let mg = 0;
    let mb = 0;
    for (let i = 0; i < n; i++) {
      mr += rgb[i * 3];
      mg += rgb[i * 3 + 1];
      mb += rgb[i * 3 + 2];
    }
    mr /= n * 255;
    mg /= n * 255;
    mb /= n * 255;

    const acc = new Float64Array(this.dim);
    for (const [word, [ar, ag, ab]] of Object.entries(COLOR_ANCHORS)) {
      const d2 = (mr - ar) ** 2 + (mg - ag) ** 2 + (mb - ab) ** 2;
      addScaled(acc, this.dir(`color:${word}`), Math.exp(-COLOR_SHARPNESS * d2));
    }

    // coarse luma layout: quantized cell means act as visual tokens, so
    // frames with different structure separate even at equal mean color
    const cellW = Math.max(1, Math.floor(width / GRID));
    const cellH = Math.max(1, Math.floor(height / GRID));
    for (let cy = 0; cy < GRID; cy++) {
      for (let cx = 0; cx < GRID; cx++) {
        let luma = 0;
        let count = 0;
        const y0 = cy * cellH;
        const x0 = cx * cellW;
        for (let y = y0; y < Math.min(y0 + cellH, height); y++) {
          for (let x = x0; x < Math.min(x0 + cellW, width); x++) {
            const o = (y * width + x) * 3;
            luma += 0.299 * rgb[o] + 0.587 * rgb[o + 1] + 0.114 * rgb[o + 2];
            count++;
          }
        }
        if (count === 0) continue;
        const q = Math.min(LUMA_LEVELS - 1, Math.floor((luma / count / 256) * LUMA_LEVELS));
        addScaled(acc, this.dir(`cell:${cx}:${cy}:${q}`), TEXTURE_WEIGHT / (GRID * GRID));
      }
    }
    return normalized32(acc);
  }
}

const MOCK_PATTERN = /^mock-dual-(\d+)$/;

export function loadEncoder(modelId: string): DualEncoder {
  const match = MOCK_PATTERN.exec(modelId);
  if (match) {
    const dim = parseInt(match[1], 10);
    if (dim < 8 || dim > 4096) {
      throw new Error(`model ${modelId}: dim must lie in [8, 4096]`);
    }
    return new MockDualEncoder(dim);
  }
  throw new Error(
    `unknown model ${JSON.stringify(modelId)}; available: mock-dual-<D> ` +
      `(e.g. mock-dual-64)`,
  );
}

export const DEFAULT_MODEL = 'mock-dual-64';
