/** Deterministic source-file fixtures shaped like the real recordings. */

import { FixtureValue, writeMat } from "./matWriter.js";

export function rng(seed: number): () => number {
  // mulberry32, plenty for fixture noise
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return (((t ^ (t >>> 14)) >>> 0) / 4294967296) * 2 - 1;
  };
}

function shuffled(codes: number[], rand: () => number): number[] {
  const out = codes.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(((rand() + 1) / 2) * (i + 1));
    [out[i], out[j]] = [out[j]!, out[i]!];
  }
  return out;
}

const MATRIX = ["ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_"];

/** Source-convention codes for a character: columns 1..6, rows 7..12. */
function sourceCodes(ch: string): { colCode: number; rowCode: number } {
  for (let r = 0; r < 6; r++) {
    const c = MATRIX[r]!.indexOf(ch);
    if (c >= 0) return { colCode: c + 1, rowCode: r + 7 };
  }
  throw new Error(`bad fixture char ${ch}`);
}

export function matrixChars(n: number, offset = 0): string {
  const all = MATRIX.join("");
  let out = "";
  for (let i = 0; i < n; i++) out += all[(offset + i * 7) % all.length];
  return out;
}

export interface CompetitionSplitSpec {
  chars: string;
  nChannels: number;
  rounds: number;
  /** samples a flash stays on; off gap is the same length */
  flashSamples: number;
  tailSamples: number;
  withLabels: boolean;
  seed: number;
}

export interface CompetitionSplit {
  vars: Record<string, FixtureValue>;
  nSamples: number;
  /** source codes per trial in onset order */
  codeLog: number[][];
  signal: Float64Array;
}

/** Continuous recording per character with a flattened intensification log. */
export function competitionSplit(spec: CompetitionSplitSpec): CompetitionSplit {
  const nChars = spec.chars.length;
  const flashesPerChar = 12 * spec.rounds;
  const soa = 2 * spec.flashSamples;
  const nSamples = flashesPerChar * soa + spec.tailSamples;
  const rand = rng(spec.seed);

  const signal = new Float64Array(nChars * nSamples * spec.nChannels);
  for (let i = 0; i < signal.length; i++) signal[i] = rand();
  const flashing = new Float64Array(nChars * nSamples);
  const stimulusCode = new Float64Array(nChars * nSamples);
  const stimulusType = new Float64Array(nChars * nSamples);
  const codeLog: number[][] = [];

  for (let i = 0; i < nChars; i++) {
    const target = sourceCodes(spec.chars[i]!);
    const log: number[] = [];
    for (let round = 0; round < spec.rounds; round++) {
      const order = shuffled([1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12], rand);
      for (let f = 0; f < 12; f++) {
        const code = order[f]!;
        log.push(code);
        const start = (round * 12 + f) * soa;
        const isTarget = code === target.colCode || code === target.rowCode;
        for (let t = start; t < start + spec.flashSamples; t++) {
          flashing[i + t * nChars] = 1;
          stimulusCode[i + t * nChars] = code;
          if (isTarget) stimulusType[i + t * nChars] = 1;
        }
      }
    }
    codeLog.push(log);
  }

  const vars: Record<string, FixtureValue> = {
    Signal: { kind: "single", dims: [nChars, nSamples, spec.nChannels], data: signal },
    Flashing: { kind: "double", dims: [nChars, nSamples], data: flashing },
    StimulusCode: { kind: "double", dims: [nChars, nSamples], data: stimulusCode },
  };
  if (spec.withLabels) {
    vars.StimulusType = { kind: "double", dims: [nChars, nSamples], data: stimulusType };
    vars.TargetChar = { kind: "char", text: spec.chars };
  }
  return { vars, nSamples, codeLog, signal };
}

export interface BedsideSpec {
  chars: string;
  rounds: number;
  flashSamples: number;
  gapSamples: number;
  tailSamples: number;
  fs: number;
  seed: number;
  withTarget: boolean;
}

export interface BedsideSession {
  buf: Buffer;
  nSamplesTotal: number;
  trialStarts: number[];
  x: Float64Array;
}

/** One continuous 8-channel session cut by 1-based trial starts. */
export function bedsideSession(spec: BedsideSpec): BedsideSession {
  const nChannels = 8;
  const nChars = spec.chars.length;
  const soa = spec.flashSamples + spec.gapSamples;
  const perChar = 12 * spec.rounds * soa + spec.tailSamples;
  const nSamplesTotal = nChars * perChar;
  const rand = rng(spec.seed);

  const x = new Float64Array(nSamplesTotal * nChannels);
  for (let i = 0; i < x.length; i++) x[i] = rand();
  const yStim = new Float64Array(nSamplesTotal);
  const y = new Float64Array(nSamplesTotal);
  const trialStarts: number[] = [];

  for (let i = 0; i < nChars; i++) {
    const start = i * perChar;
    trialStarts.push(start + 1);
    const target = sourceCodes(spec.chars[i]!);
    for (let round = 0; round < spec.rounds; round++) {
      const order = shuffled([1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12], rand);
      for (let f = 0; f < 12; f++) {
        const code = order[f]!;
        const at = start + (round * 12 + f) * soa;
        const isTarget = code === target.colCode || code === target.rowCode;
        for (let t = at; t < at + spec.flashSamples; t++) {
          yStim[t] = code;
          if (isTarget) y[t] = 1;
        }
      }
    }
  }

  const fields: Record<string, FixtureValue> = {
    X: { kind: "double", dims: [nSamplesTotal, nChannels], data: x },
    y: { kind: "double", dims: [nSamplesTotal, 1], data: y },
    y_stim: { kind: "double", dims: [nSamplesTotal, 1], data: yStim },
    trial: { kind: "double", dims: [1, nChars], data: trialStarts },
    fs: { kind: "double", dims: [1, 1], data: [spec.fs] },
  };
  if (spec.withTarget) {
    fields.target = { kind: "char", text: spec.chars };
  }
  return {
    buf: writeMat({ data: { kind: "struct", fields } }),
    nSamplesTotal,
    trialStarts,
    x,
  };
}

export interface KeyboardSpec {
  nChannels: number;
  nSamples: number;
  seed: number;
  compress?: boolean;
}

export interface KeyboardRecording {
  buf: Buffer;
  data: Float64Array;
}

/** [channels x samples x 40 x 6] block design, noise only. */
export function keyboardRecording(spec: KeyboardSpec): KeyboardRecording {
  const rand = rng(spec.seed);
  const n = spec.nChannels * spec.nSamples * 40 * 6;
  const data = new Float64Array(n);
  for (let i = 0; i < n; i++) data[i] = rand();
  const buf = writeMat(
    { data: { kind: "single", dims: [spec.nChannels, spec.nSamples, 40, 6], data } },
    { compress: spec.compress ?? false },
  );
  // writeMat rounds through float32; mirror that for expected-value checks
  const rounded = new Float64Array(n);
  for (let i = 0; i < n; i++) rounded[i] = Math.fround(data[i]!);
  return { buf, data: rounded };
}
