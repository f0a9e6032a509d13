/** Bedside 8-channel matrix-speller recordings to the canonical layout.

The source file carries one continuous session in a ``data`` struct: ``X``
[samples x 8], per-sample stimulus code ``y_stim`` (0 off, 1..12 during an
intensification, column/row convention as in the competition files),
per-sample target flag ``y``, 1-based trial start indices ``trial``, the
rate ``fs``, and the spelled text in ``target``. The session is cut at the
trial starts, one character per segment, first ``trainChars`` characters
to the train split and the remainder to test.
*/

import { ConversionError } from "./errors.js";
import {
  DatasetOut,
  PyFloat,
  TrialOut,
  writeDataset,
  znormToF32,
} from "./canonical.js";
import { BEDSIDE_CHANNEL_NAMES, MATRIX_ROWS, matrixCodesFor } from "./grids.js";
import { MatNumeric, MatStruct, parseMat } from "./mat.js";
import * as fs from "node:fs";

export interface AlsOptions {
  path: string;
  outPath: string;
  subjectId: string;
  trainChars?: number;
  /** overrides the file's spelled text when given */
  targetText?: string;
}

export interface AlsSummary {
  datasetId: "als-008-2014";
  subjectId: string;
  trainChars: number;
  testChars: number;
  nChannels: number;
  fs: number;
}

function structField(s: MatStruct, name: string): MatNumeric {
  const vals = s.fields.get(name);
  if (vals === undefined || vals.length === 0) {
    throw new ConversionError(`data struct has no field ${name}`);
  }
  const v = vals[0]!;
  if (v.kind !== "numeric") {
    throw new ConversionError(`field ${name} is ${v.kind}, expected numeric`);
  }
  return v;
}

export function convertAls(opts: AlsOptions): AlsSummary {
  const trainChars = opts.trainChars ?? 21;
  const vars = parseMat(fs.readFileSync(opts.path));
  const data = vars.get("data");
  if (data === undefined) throw new ConversionError("missing variable data");
  if (data.kind !== "struct") {
    throw new ConversionError(`variable data is ${data.kind}, expected struct`);
  }
  const nElements = data.dims.reduce((a, b) => a * b, 1);
  if (nElements !== 1) {
    throw new ConversionError(`data struct has ${nElements} elements, expected one session`);
  }

  const x = structField(data, "X");
  if (x.dims.length !== 2) {
    throw new ConversionError(`X has ${x.dims.length} dimensions, expected 2`);
  }
  const [nSamplesTotal, nChannels] = x.dims as [number, number];
  const yStim = structField(data, "y_stim");
  const y = structField(data, "y");
  for (const [name, arr] of [["y_stim", yStim], ["y", y]] as const) {
    if (arr.data.length !== nSamplesTotal) {
      throw new ConversionError(
        `${name} has ${arr.data.length} samples, X has ${nSamplesTotal}`,
      );
    }
  }
  const trialStarts = structField(data, "trial");
  const fsHz = structField(data, "fs").data[0]!;
  if (!(fsHz > 0)) throw new ConversionError(`fs is ${fsHz}, expected a positive rate`);

  let text = opts.targetText;
  if (text === undefined) {
    const tv = data.fields.get("target")?.[0];
    if (tv === undefined || tv.kind !== "char") {
      throw new ConversionError("no spelled text: field target missing and no override given");
    }
    text = tv.rows.join("");
  }
  const nChars = trialStarts.data.length;
  if (text.length !== nChars) {
    throw new ConversionError(`spelled text has ${text.length} characters for ${nChars} trials`);
  }
  if (trainChars < 1 || trainChars >= nChars) {
    throw new ConversionError(`trainChars ${trainChars} outside 1..${nChars - 1}`);
  }

  const trials: TrialOut[] = [];
  for (let i = 0; i < nChars; i++) {
    const start = trialStarts.data[i]! - 1;
    const end = i + 1 < nChars ? trialStarts.data[i + 1]! - 1 : nSamplesTotal;
    if (!(Number.isInteger(start) && start >= 0 && start < end && end <= nSamplesTotal)) {
      throw new ConversionError(`trial index ${i} spans [${start}, ${end}), outside the recording`);
    }
    const nSamples = end - start;
    const userChar = text[i]!;
    matrixCodesFor(userChar);
    const onsets: number[] = [];
    const codes: number[] = [];
    const labelCol: number[] = [];
    for (let t = start; t < end; t++) {
      const code = yStim.data[t]!;
      if (code === 0) continue;
      if (t > start && yStim.data[t - 1]! === code) continue;
      if (code < 1 || code > 12) {
        throw new ConversionError(`y_stim value ${code} outside 0..12`);
      }
      onsets.push(t - start);
      codes.push(code <= 6 ? code + 6 : code - 6);
      labelCol.push(y.data[t]! > 0 ? 1 : 0);
    }
    if (onsets.length === 0) {
      throw new ConversionError(`y_stim marks no intensifications in trial ${i}`);
    }
    // column-major [samples x channels] to row-major [channels x samples]
    const raw = new Float64Array(nChannels * nSamples);
    for (let c = 0; c < nChannels; c++) {
      for (let t = 0; t < nSamples; t++) {
        raw[c * nSamples + t] = x.data[start + t + c * nSamplesTotal]!;
      }
    }
    trials.push({
      trialId: i,
      data: znormToF32(raw, nChannels, nSamples),
      nChannels,
      nSamples,
      onsets,
      codes,
      labels: labelCol,
      split: i < trainChars ? "train" : "test",
      meta: { user_char: userChar },
    });
  }

  const channelNames =
    nChannels === BEDSIDE_CHANNEL_NAMES.length
      ? BEDSIDE_CHANNEL_NAMES.slice()
      : Array.from({ length: nChannels }, (_, c) => `ch${c}`);
  const ds: DatasetOut = {
    paradigm: "p300",
    fs: fsHz,
    channelNames,
    subjectId: opts.subjectId,
    grid: { rows: MATRIX_ROWS.slice() },
    protocol: {
      dataset_id: "als-008-2014",
      flash_s: new PyFloat(0.125),
      soa_s: new PyFloat(0.25),
    },
    trials,
  };
  writeDataset(ds, opts.outPath);
  return {
    datasetId: "als-008-2014",
    subjectId: opts.subjectId,
    trainChars,
    testChars: nChars - trainChars,
    nChannels,
    fs: fsHz,
  };
}
