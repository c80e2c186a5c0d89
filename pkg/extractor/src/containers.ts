/**
 * Binary containers for frame and prompt embeddings.
 *
 * Both are little-endian:
 *   magic (VFE1 | TFE1) | u32 rows | u32 dim | u32 dtype tag (1 = f32)
 *   rows*dim f32 row-major | u32 trailer length | UTF-8 JSON trailer
 *
 * The .vfeat trailer carries {video_id, fps}; the .tfeat trailer carries
 * {class_names, prompt_template}.
 */

import { promises as fs } from 'fs';

export const VFEAT_MAGIC = 'VFE1';
export const TFEAT_MAGIC = 'TFE1';
export const DTYPE_F32 = 1;

export interface FeatureMatrix {
  videoId: string;
  fps: number;
  rows: number;
  dim: number;
  data: Float32Array; // rows*dim, row-major
}

export interface PromptBank {
  classNames: string[];
  promptTemplate: string;
  rows: number;
  dim: number;
  data: Float32Array;
}

function encodeContainer(
  magic: string,
  rows: number,
  dim: number,
  data: Float32Array,
  trailer: object,
): Buffer {
  if (data.length !== rows * dim) {
    throw new Error(`data length ${data.length} != ${rows}x${dim}`);
  }
  const trailerBytes = Buffer.from(JSON.stringify(trailer), 'utf-8');
  const buf = Buffer.alloc(4 + 12 + rows * dim * 4 + 4 + trailerBytes.length);
  let off = buf.write(magic, 0, 'ascii');
  off = buf.writeUInt32LE(rows, off);
  off = buf.writeUInt32LE(dim, off);
  off = buf.writeUInt32LE(DTYPE_F32, off);
  for (let i = 0; i < data.length; i++) {
    off = buf.writeFloatLE(data[i], off);
  }
  off = buf.writeUInt32LE(trailerBytes.length, off);
  trailerBytes.copy(buf, off);
  return buf;
}

function decodeContainer(
  buf: Buffer,
  magic: string,
  path: string,
): { rows: number; dim: number; data: Float32Array; trailer: any } {
  if (buf.length < 16) {
    throw new Error(`${path}: truncated header`);
  }
  const got = buf.toString('ascii', 0, 4);
  if (got !== magic) {
    throw new Error(`${path}: bad magic ${JSON.stringify(got)}, expected ${magic}`);
  }
  const rows = buf.readUInt32LE(4);
  const dim = buf.readUInt32LE(8);
  const tag = buf.readUInt32LE(12);
  if (tag !== DTYPE_F32) {
    throw new Error(`${path}: unsupported dtype tag ${tag}`);
  }
  const matrixBytes = rows * dim * 4;
  if (buf.length < 16 + matrixBytes + 4) {
    throw new Error(`${path}: truncated matrix (${rows}x${dim})`);
  }
  const data = new Float32Array(rows * dim);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(16 + i * 4);
  }
  const trailerLen = buf.readUInt32LE(16 + matrixBytes);
  const trailerStart = 16 + matrixBytes + 4;
  if (buf.length < trailerStart + trailerLen) {
    throw new Error(`${path}: truncated trailer`);
  }
  const trailer = JSON.parse(
    buf.toString('utf-8', trailerStart, trailerStart + trailerLen),
  );
  return { rows, dim, data, trailer };
}

export async function writeFeatures(matrix: FeatureMatrix, path: string): Promise<void> {
  const buf = encodeContainer(VFEAT_MAGIC, matrix.rows, matrix.dim, matrix.data, {
    video_id: matrix.videoId,
    fps: matrix.fps,
  });
  await fs.writeFile(path, buf);
}

export async function readFeatures(path: string): Promise<FeatureMatrix> {
  const buf = await fs.readFile(path);
  const { rows, dim, data, trailer } = decodeContainer(buf, VFEAT_MAGIC, path);
  if (typeof trailer.video_id !== 'string' || typeof trailer.fps !== 'number') {
    throw new Error(`${path}: trailer must carry video_id and fps`);
  }
  return { videoId: trailer.video_id, fps: trailer.fps, rows, dim, data };
}

export async function writePrompts(bank: PromptBank, path: string): Promise<void> {
  const buf = encodeContainer(TFEAT_MAGIC, bank.rows, bank.dim, bank.data, {
    class_names: bank.classNames,
    prompt_template: bank.promptTemplate,
  });
  await fs.writeFile(path, buf);
}

export async function readPrompts(path: string): Promise<PromptBank> {
  const buf = await fs.readFile(path);
  const { rows, dim, data, trailer } = decodeContainer(buf, TFEAT_MAGIC, path);
  if (!Array.isArray(trailer.class_names) || trailer.class_names.length !== rows) {
    throw new Error(`${path}: class_names must list one name per row`);
  }
  return {
    classNames: trailer.class_names,
    promptTemplate: trailer.prompt_template ?? '',
    rows,
    dim,
    data,
  };
}
