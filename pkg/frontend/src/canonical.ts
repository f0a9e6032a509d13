/** Canonical dataset directories.

The layout is fixed by the consuming library: ``manifest.json`` (sorted
keys, two-space indent, trailing newline), ``events.csv`` with one integer
row per stimulation event, and headerless little-endian float32 payloads
under ``trials/``. The writer here reproduces those bytes exactly, so a
converted dataset is indistinguishable from a natively written one; the
reader re-validates what was emitted and backs the round-trip tests.
*/

import * as fs from "node:fs";
import * as path from "node:path";
import { ConversionError } from "./errors.js";

export const DATASET_SCHEMA_VERSION = 1;
export const P300_MAX_CODE = 12;

/** Marks a number that must serialize with a decimal point. */
export class PyFloat {
  constructor(readonly value: number) {}
}

export type JsonValue =
  | null
  | boolean
  | number
  | PyFloat
  | string
  | JsonValue[]
  | { [key: string]: JsonValue };

function escapeString(s: string): string {
  let out = '"';
  for (const ch of s) {
    const code = ch.codePointAt(0)!;
    if (ch === '"') out += '\\"';
    else if (ch === "\\") out += "\\\\";
    else if (code === 0x08) out += "\\b";
    else if (code === 0x09) out += "\\t";
    else if (code === 0x0a) out += "\\n";
    else if (code === 0x0c) out += "\\f";
    else if (code === 0x0d) out += "\\r";
    else if (code < 0x20 || code > 0x7e) {
      // non-ASCII goes out as surrogate-pair escapes, the consumer's default
      if (code > 0xffff) {
        const h = Math.floor((code - 0x10000) / 0x400) + 0xd800;
        const l = ((code - 0x10000) % 0x400) + 0xdc00;
        out += `\\u${h.toString(16).padStart(4, "0")}\\u${l.toString(16).padStart(4, "0")}`;
      } else {
        out += `\\u${code.toString(16).padStart(4, "0")}`;
      }
    } else out += ch;
  }
  return out + '"';
}

function formatFloat(v: number): string {
  if (!Number.isFinite(v)) {
    throw new ConversionError(`non-finite float ${v} in manifest`);
  }
  if (Number.isInteger(v) && Math.abs(v) < 1e16) {
    return `${v.toFixed(1)}`;
  }
  const s = String(v);
  if (s.includes("e") || s.includes("E")) {
    // exponent spellings differ between emitters; nothing in a manifest
    // should be this small or large
    throw new ConversionError(`float ${v} needs exponent notation`);
  }
  return s;
}

/** Serialize like the consumer writes its own manifests. */
export function pyJson(value: JsonValue, indentLevel = 0): string {
  const pad = "  ".repeat(indentLevel);
  const inner = "  ".repeat(indentLevel + 1);
  if (value === null) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") {
    if (!Number.isInteger(value)) {
      throw new ConversionError(
        `bare non-integer ${value}; wrap floats in PyFloat so formatting is explicit`,
      );
    }
    return String(value);
  }
  if (value instanceof PyFloat) return formatFloat(value.value);
  if (typeof value === "string") return escapeString(value);
  if (Array.isArray(value)) {
    if (value.length === 0) return "[]";
    const items = value.map((v) => inner + pyJson(v, indentLevel + 1));
    return "[\n" + items.join(",\n") + "\n" + pad + "]";
  }
  const keys = Object.keys(value).sort();
  if (keys.length === 0) return "{}";
  const items = keys.map((k) => `${inner}${escapeString(k)}: ${pyJson(value[k]!, indentLevel + 1)}`);
  return "{\n" + items.join(",\n") + "\n" + pad + "}";
}

export interface TrialOut {
  trialId: number;
  /** row-major [nChannels x nSamples] */
  data: Float32Array;
  nChannels: number;
  nSamples: number;
  onsets: number[];
  codes: number[];
  labels: number[];
  split: string;
  meta: { [key: string]: JsonValue };
}

export interface DatasetOut {
  paradigm: "p300" | "ssvep";
  fs: number;
  channelNames: string[];
  subjectId: string;
  grid: { [key: string]: JsonValue };
  protocol: { [key: string]: JsonValue };
  trials: TrialOut[];
}

function trialFile(trialId: number): string {
  return `trials/trial_${String(trialId).padStart(5, "0")}.f32`;
}

function payloadBytes(data: Float32Array): Buffer {
  const buf = Buffer.allocUnsafe(data.length * 4);
  for (let i = 0; i < data.length; i++) buf.writeFloatLE(data[i]!, 4 * i);
  return buf;
}

export function writeDataset(ds: DatasetOut, root: string): void {
  fs.mkdirSync(path.join(root, "trials"), { recursive: true });
  const manifestTrials: JsonValue[] = [];
  const eventLines = ["trial_id,onset_sample,code,label"];
  for (const trial of ds.trials) {
    if (trial.data.length !== trial.nChannels * trial.nSamples) {
      throw new ConversionError(
        `trial ${trial.trialId}: ${trial.data.length} values for ` +
          `${trial.nChannels}x${trial.nSamples}`,
      );
    }
    const rel = trialFile(trial.trialId);
    manifestTrials.push({
      trial_id: trial.trialId,
      file: rel,
      n_channels: trial.nChannels,
      n_samples: trial.nSamples,
      split: trial.split,
      meta: trial.meta,
    });
    fs.writeFileSync(path.join(root, rel), payloadBytes(trial.data));
    for (let i = 0; i < trial.onsets.length; i++) {
      eventLines.push(
        `${trial.trialId},${trial.onsets[i]},${trial.codes[i]},${trial.labels[i]}`,
      );
    }
  }
  const manifest: JsonValue = {
    schema_version: DATASET_SCHEMA_VERSION,
    paradigm: ds.paradigm,
    fs: new PyFloat(ds.fs),
    channel_names: ds.channelNames,
    subject_id: ds.subjectId,
    grid: ds.grid,
    protocol: ds.protocol,
    trials: manifestTrials,
  };
  fs.writeFileSync(path.join(root, "events.csv"), eventLines.join("\n") + "\n");
  fs.writeFileSync(path.join(root, "manifest.json"), pyJson(manifest) + "\n");
}

export interface TrialIn {
  trialId: number;
  file: string;
  nChannels: number;
  nSamples: number;
  split: string;
  meta: Record<string, unknown>;
  payload: Buffer;
  onsets: number[];
  codes: number[];
  labels: number[];
}

export interface DatasetIn {
  paradigm: string;
  fs: number;
  channelNames: string[];
  subjectId: string;
  grid: Record<string, unknown>;
  protocol: Record<string, unknown>;
  trials: TrialIn[];
}

/** Read a dataset back, applying the consumer's validation rules. */
export function readDataset(root: string): DatasetIn {
  const manifestPath = path.join(root, "manifest.json");
  if (!fs.existsSync(manifestPath)) {
    throw new ConversionError(`${root}: no manifest.json`);
  }
  let manifest: Record<string, unknown>;
  try {
    manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  } catch (err) {
    throw new ConversionError(`${manifestPath}: invalid JSON: ${(err as Error).message}`);
  }
  if (manifest.schema_version !== DATASET_SCHEMA_VERSION) {
    throw new ConversionError(
      `${root}: unsupported dataset schema version ${JSON.stringify(manifest.schema_version)}`,
    );
  }
  const paradigm = manifest.paradigm;
  if (paradigm !== "p300" && paradigm !== "ssvep") {
    throw new ConversionError(`${root}: unknown paradigm ${JSON.stringify(paradigm)}`);
  }
  const fsHz = Number(manifest.fs);
  if (!(fsHz > 0)) {
    throw new ConversionError(`${root}: nonpositive sampling rate ${fsHz}`);
  }

  const eventsPath = path.join(root, "events.csv");
  if (!fs.existsSync(eventsPath)) {
    throw new ConversionError(`${root}: no events.csv`);
  }
  const lines = fs.readFileSync(eventsPath, "utf-8").split("\n");
  if (lines[0] !== "trial_id,onset_sample,code,label") {
    throw new ConversionError(`${eventsPath}: unexpected header ${JSON.stringify(lines[0])}`);
  }
  const events = new Map<number, Array<[number, number, number]>>();
  for (let lineno = 1; lineno < lines.length; lineno++) {
    const line = lines[lineno]!;
    if (line === "" && lineno === lines.length - 1) continue;
    const parts = line.split(",");
    if (parts.length !== 4) {
      throw new ConversionError(
        `${eventsPath}:${lineno + 1}: expected 4 columns, got ${parts.length}`,
      );
    }
    const nums = parts.map((p) => Number(p));
    if (nums.some((v) => !Number.isInteger(v))) {
      throw new ConversionError(`${eventsPath}:${lineno + 1}: non-integer field`);
    }
    const [tid, onset, code, label] = nums as [number, number, number, number];
    if (!events.has(tid)) events.set(tid, []);
    events.get(tid)!.push([onset, code, label]);
  }

  const channelNames = manifest.channel_names as string[];
  const grid = (manifest.grid ?? {}) as Record<string, unknown>;
  let maxCode: number;
  if (paradigm === "p300") {
    maxCode = P300_MAX_CODE;
  } else {
    const chars = grid.characters as unknown[] | undefined;
    if (!Array.isArray(chars) || chars.length === 0) {
      throw new ConversionError(`${root}: ssvep manifest without grid characters`);
    }
    maxCode = chars.length;
  }

  const trials: TrialIn[] = [];
  for (const entry of manifest.trials as Array<Record<string, unknown>>) {
    const tid = Number(entry.trial_id);
    const rel = String(entry.file);
    const payloadPath = path.join(root, rel);
    if (!fs.existsSync(payloadPath)) {
      throw new ConversionError(`trial ${tid}: missing payload ${rel}`);
    }
    const payload = fs.readFileSync(payloadPath);
    const nCh = Number(entry.n_channels);
    const nS = Number(entry.n_samples);
    if (payload.length !== 4 * nCh * nS) {
      throw new ConversionError(
        `trial ${tid}: payload ${rel} has ${payload.length} bytes, expected ${4 * nCh * nS}`,
      );
    }
    if (channelNames.length !== nCh) {
      throw new ConversionError(
        `trial ${tid}: ${nCh} channels but manifest names ${channelNames.length}`,
      );
    }
    const ev = (events.get(tid) ?? []).slice().sort((a, b) => a[0] - b[0] || a[1] - b[1]);
    for (const [onset, code] of ev) {
      if (onset < 0 || onset >= nS) {
        throw new ConversionError(`trial ${tid}: event onset outside the recording`);
      }
      if (code < 1 || code > maxCode) {
        throw new ConversionError(
          `trial ${tid}: event code outside 1..${maxCode} for paradigm ${paradigm}`,
        );
      }
    }
    trials.push({
      trialId: tid,
      file: rel,
      nChannels: nCh,
      nSamples: nS,
      split: String(entry.split ?? "all"),
      meta: (entry.meta ?? {}) as Record<string, unknown>,
      payload,
      onsets: ev.map((e) => e[0]),
      codes: ev.map((e) => e[1]),
      labels: ev.map((e) => e[2]),
    });
  }
  return {
    paradigm,
    fs: fsHz,
    channelNames,
    subjectId: String(manifest.subject_id ?? ""),
    grid,
    protocol: (manifest.protocol ?? {}) as Record<string, unknown>,
    trials,
  };
}

export interface DatasetSummary {
  paradigm: string;
  fs: number;
  nChannels: number;
  nTrials: number;
  perSplit: Record<string, number>;
  nEvents: number;
}

export function summarize(ds: DatasetIn): DatasetSummary {
  const perSplit: Record<string, number> = {};
  let nEvents = 0;
  for (const t of ds.trials) {
    perSplit[t.split] = (perSplit[t.split] ?? 0) + 1;
    nEvents += t.onsets.length;
  }
  return {
    paradigm: ds.paradigm,
    fs: ds.fs,
    nChannels: ds.channelNames.length,
    nTrials: ds.trials.length,
    perSplit,
    nEvents,
  };
}

/** Per-channel z-normalization in double precision, then float32 payload. */
export function znormToF32(data: Float64Array, nChannels: number, nSamples: number): Float32Array {
  const out = new Float32Array(nChannels * nSamples);
  for (let c = 0; c < nChannels; c++) {
    const base = c * nSamples;
    let mean = 0;
    for (let s = 0; s < nSamples; s++) mean += data[base + s]!;
    mean /= nSamples;
    let varSum = 0;
    for (let s = 0; s < nSamples; s++) {
      const d = data[base + s]! - mean;
      varSum += d * d;
    }
    const sd = Math.sqrt(varSum / nSamples);
    if (sd === 0) {
      throw new ConversionError(`constant channel ${c} cannot be z-normalized`);
    }
    for (let s = 0; s < nSamples; s++) {
      out[base + s] = (data[base + s]! - mean) / sd;
    }
  }
  return out;
}
