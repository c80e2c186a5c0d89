/**
 * Cross-component checks: everything this tool writes must load in the
 * detection toolkit, and a clip of a known color class must come back
 * correctly labeled from the real detect CLI.
 */

import { execFileSync } from 'child_process';
import { promises as fs } from 'fs';
import * as path from 'path';
import { describe, expect, it } from 'vitest';
import { readFeatures } from '../src/containers.js';
import { loadEncoder } from '../src/encoder.js';
import { extractPrompts, extractVideo } from '../src/extract.js';
import { ppmBytes, solidFrame, tmpDir } from './helpers.js';

function python(script: string, ...args: string[]): string {
  return execFileSync('python3', ['-c', script, ...args], {
    encoding: 'utf-8',
    timeout: 60_000,
  });
}

const LOAD_SCRIPT = `
import json, sys
from zadkit import load_features, load_prompts
fm = load_features(sys.argv[1])
bank = load_prompts(sys.argv[2])
print(json.dumps({
    "T": fm.num_frames, "D": fm.dim, "fps": fm.fps, "video_id": fm.video_id,
    "classes": bank.class_names, "template": bank.prompt_template,
}))
`;

const WRITE_SCRIPT = `
import numpy as np, sys
from zadkit import FeatureMatrix, save_features
rng = np.random.default_rng(5)
m = rng.standard_normal((7, 12))
m /= np.linalg.norm(m, axis=1, keepdims=True)
save_features(FeatureMatrix(video_id="pyvid", fps=8.0,
                            data=m.astype(np.float32)), sys.argv[1])
`;

async function writeSmokeClip(dir: string): Promise<string> {
  // 140 frames: gray lead-in, a red action span at [40, 99], gray lead-out
  const clip = path.join(dir, 'redclip');
  await fs.mkdir(clip);
  for (let i = 0; i < 140; i++) {
    const inAction = i >= 40 && i < 100;
    const luma = 90 + ((i * 13) % 60);
    const color: [number, number, number] = inAction ? [230, 20, 20] : [luma, luma, luma];
    const name = `f${String(i).padStart(3, '0')}.ppm`;
    await fs.writeFile(path.join(clip, name), ppmBytes(solidFrame(8, 8, color)));
  }
  return clip;
}

describe('primary toolkit interoperability', () => {
  it('loads extractor output with matching shapes and metadata', async () => {
    const dir = await tmpDir();
    const clip = path.join(dir, 'tinyclip');
    await fs.mkdir(clip);
    for (let i = 0; i < 5; i++) {
      await fs.writeFile(
        path.join(clip, `f${i}.ppm`),
        ppmBytes(solidFrame(8, 8, [40 * i, 10, 10])),
      );
    }
    const enc = loadEncoder('mock-dual-64');
    const vfeat = path.join(dir, 'tinyclip.vfeat');
    const tfeat = path.join(dir, 'bank.tfeat');
    await extractVideo(enc, clip, vfeat, 30);
    await extractPrompts(enc, ['red', 'green'], tfeat);

    const loaded = JSON.parse(python(LOAD_SCRIPT, vfeat, tfeat));
    expect(loaded).toEqual({
      T: 5,
      D: 64,
      fps: 30,
      video_id: 'tinyclip',
      classes: ['red', 'green'],
      template: 'a video of action {CLS}',
    });
  });

  it('reads toolkit-written containers back', async () => {
    const dir = await tmpDir();
    const vfeat = path.join(dir, 'py.vfeat');
    python(WRITE_SCRIPT, vfeat);
    const matrix = await readFeatures(vfeat);
    expect(matrix.videoId).toBe('pyvid');
    expect(matrix.fps).toBe(8);
    expect(matrix.rows).toBe(7);
    expect(matrix.dim).toBe(12);
    let norm = 0;
    for (let i = 0; i < 12; i++) norm += matrix.data[i] * matrix.data[i];
    expect(Math.sqrt(norm)).toBeCloseTo(1.0, 5);
  });

  it('detect CLI labels a known-class clip correctly', async () => {
    const dir = await tmpDir();
    const clip = await writeSmokeClip(dir);
    const enc = loadEncoder('mock-dual-64');
    const vfeat = path.join(dir, 'redclip.vfeat');
    const tfeat = path.join(dir, 'bank.tfeat');
    await extractVideo(enc, clip, vfeat, 25);
    await extractPrompts(enc, ['red', 'green', 'blue'], tfeat);

    const pred = path.join(dir, 'pred.json');
    execFileSync(
      'python3',
      ['-m', 'zadkit.cli', 'detect', '--features', vfeat, '--prompts', tfeat,
        '--out', pred, '--window', '9'],
      { encoding: 'utf-8', timeout: 60_000 },
    );
    const results = JSON.parse(await fs.readFile(pred, 'utf-8')).results;
    const dets = results.redclip;
    expect(dets.length).toBeGreaterThan(0);
    const top = dets.reduce((a: any, b: any) => (b.score > a.score ? b : a));
    expect(top.label).toBe('red');
    // action planted at frames [40, 100) of a 25 fps clip: 1.6s .. 4.0s
    expect(top.segment[0]).toBeGreaterThan(1.0);
    expect(top.segment[0]).toBeLessThan(2.2);
    expect(top.segment[1]).toBeGreaterThan(3.4);
    expect(top.segment[1]).toBeLessThan(4.6);
  });
});
