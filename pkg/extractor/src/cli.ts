#!/usr/bin/env node
/**
 * vil-extractor: frame and prompt embeddings for the detection toolkit.
 *
 * Usage:
 *   vil-extractor extract --video PATH --out FILE [--model ID] [--fps N]
 *   vil-extractor prompts --classes FILE --out FILE [--model ID] [--template STR]
 */

import { promises as fs } from 'fs';
import { DEFAULT_MODEL, loadEncoder } from './encoder.js';
import { DEFAULT_TEMPLATE, extractPrompts, extractVideo, parseClassList } from './extract.js';

const USAGE = `usage:
  vil-extractor extract --video PATH --out FILE [--model ID] [--fps N]
  vil-extractor prompts --classes FILE --out FILE [--model ID] [--template STR]

models: mock-dual-<D> (default ${DEFAULT_MODEL})
video inputs: .y4m clip or directory of .ppm frames`;

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith('--')) {
      throw new Error(`unexpected argument ${JSON.stringify(arg)}`);
    }
    const value = argv[i + 1];
    if (value === undefined) {
      throw new Error(`flag ${arg} needs a value`);
    }
    flags.set(arg.slice(2), value);
    i++;
  }
  return flags;
}

function need(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

async function runExtract(flags: Map<string, string>): Promise<void> {
  const encoder = loadEncoder(flags.get('model') ?? DEFAULT_MODEL);
  const fps = flags.has('fps') ? Number(flags.get('fps')) : undefined;
  if (fps !== undefined && !(fps > 0)) {
    throw new Error('--fps must be a positive number');
  }
  const out = need(flags, 'out');
  const result = await extractVideo(encoder, need(flags, 'video'), out, fps);
  console.log(
    `wrote ${out} (${result.rows} frames x ${result.dim} dims, ` +
      `${result.fps} fps, model ${encoder.id})`,
  );
}

async function runPrompts(flags: Map<string, string>): Promise<void> {
  const encoder = loadEncoder(flags.get('model') ?? DEFAULT_MODEL);
  const classNames = parseClassList(await fs.readFile(need(flags, 'classes'), 'utf-8'));
  const template = flags.get('template') ?? DEFAULT_TEMPLATE;
  const out = need(flags, 'out');
  const bank = await extractPrompts(encoder, classNames, out, template);
  console.log(`wrote ${out} (${bank.rows} classes x ${bank.dim} dims, model ${encoder.id})`);
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    if (command === 'extract') {
      await runExtract(parseFlags(rest));
      return 0;
    }
    if (command === 'prompts') {
      await runPrompts(parseFlags(rest));
      return 0;
    }
    console.error(USAGE);
    return 2;
  } catch (err) {
    const msg = err instanceof Error ? err.message : String(err);
    console.error(`vil-extractor: ${msg}`);
    return msg.startsWith('missing required flag') || msg.startsWith('flag --') ? 2 : 1;
  }
}

const entry = process.argv[1] ?? '';
if (entry.endsWith('cli.js') || entry.endsWith('vil-extractor')) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
