/**
 * Extraction jobs: decode a video, run the dual encoder, and write the
 * embedding containers the detection toolkit consumes.
 */

import { FeatureMatrix, PromptBank, writeFeatures, writePrompts } from './containers.js';
import { DualEncoder } from './encoder.js';
import { loadVideo } from './frames.js';

export const DEFAULT_TEMPLATE = 'a video of action {CLS}';
export const PLACEHOLDER = '{CLS}';

export interface ExtractionResult {
  videoId: string;
  fps: number;
  rows: number;
  dim: number;
}

export async function extractVideo(
  encoder: DualEncoder,
  videoPath: string,
  outPath: string,
  fpsFlag?: number,
): Promise<ExtractionResult> {
  const video = await loadVideo(videoPath, fpsFlag);
  const rows = video.frames.length;
  const data = new Float32Array(rows * encoder.dim);
  for (let t = 0; t < rows; t++) {
    data.set(encoder.encodeImage(video.frames[t]), t * encoder.dim);
  }
  const matrix: FeatureMatrix = {
    videoId: video.videoId,
    fps: video.fps,
    rows,
    dim: encoder.dim,
    data,
  };
  await writeFeatures(matrix, outPath);
  return { videoId: video.videoId, fps: video.fps, rows, dim: encoder.dim };
}

export function renderPrompt(template: string, className: string): string {
  if (!template.includes(PLACEHOLDER)) {
    throw new Error(`template must contain ${PLACEHOLDER}: ${JSON.stringify(template)}`);
  }
  return template.split(PLACEHOLDER).join(className);
}

export async function extractPrompts(
  encoder: DualEncoder,
  classNames: string[],
  outPath: string,
  template: string = DEFAULT_TEMPLATE,
): Promise<PromptBank> {
  if (classNames.length === 0) {
    throw new Error('class list must not be empty');
  }
  const data = new Float32Array(classNames.length * encoder.dim);
  classNames.forEach((name, i) => {
    data.set(encoder.encodeText(renderPrompt(template, name)), i * encoder.dim);
  });
  const bank: PromptBank = {
    classNames,
    promptTemplate: template,
    rows: classNames.length,
    dim: encoder.dim,
    data,
  };
  await writePrompts(bank, outPath);
  return bank;
}

/** Class list file: one class per line, blank lines and # comments skipped. */
export function parseClassList(text: string): string[] {
  return text
    .split('\n')
    .map((line) => line.trim())
    .filter((line) => line.length > 0 && !line.startsWith('#'));
}
