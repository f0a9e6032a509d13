/** Competition matrix-speller recordings to the canonical layout.

The source distributes one file per split: ``Signal`` [chars x samples x 64],
``Flashing`` and ``StimulusCode`` [chars x samples], plus ``StimulusType``
and ``TargetChar`` on the training file. Test-split labels were released
separately as a plain character string and are passed in here.

Timing reconstruction: intensification onsets are the rising edges of
``Flashing``; the stimulus code is sampled at each onset. Source codes use
1..6 for columns and 7..12 for rows, the canonical convention is the
mirror (1..6 rows, 7..12 columns), so codes are remapped by +-6.
*/

import { ConversionError } from "./errors.js";
import {
  DatasetOut,
  PyFloat,
  TrialOut,
  writeDataset,
  znormToF32,
} from "./canonical.js";
import { MATRIX_ROWS, matrixCodesFor } from "./grids.js";
import { MatNumeric, expectChar, expectNumeric, parseMat } from "./mat.js";
import * as fs from "node:fs";

export interface Bci3Options {
  trainPath: string;
  testPath: string;
  /** one character per test trial, released after the fact */
  testLabels: string;
  outPath: string;
  subjectId: string;
  fsHz?: number;
}

export interface Bci3Summary {
  datasetId: "bci3-ii";
  subjectId: string;
  trainChars: number;
  testChars: number;
  intensificationsPerChar: number;
  nChannels: number;
  fs: number;
}

function remapCode(source: number): number {
  if (source < 1 || source > 12) {
    throw new ConversionError(`StimulusCode value ${source} outside 1..12`);
  }
  return source <= 6 ? source + 6 : source - 6;
}

interface SplitArrays {
  nChars: number;
  nSamples: number;
  nChannels: number;
  signal: MatNumeric;
  flashing: MatNumeric;
  stimulusCode: MatNumeric;
  stimulusType: MatNumeric | null;
  targetChars: string | null;
}

function loadSplit(path: string, wantType: boolean): SplitArrays {
  const vars = parseMat(fs.readFileSync(path));
  const signal = expectNumeric(vars, "Signal");
  if (signal.dims.length !== 3) {
    throw new ConversionError(`Signal has ${signal.dims.length} dimensions, expected 3`);
  }
  const [nChars, nSamples, nChannels] = signal.dims as [number, number, number];
  const flashing = expectNumeric(vars, "Flashing");
  const stimulusCode = expectNumeric(vars, "StimulusCode");
  for (const [name, arr] of [
    ["Flashing", flashing],
    ["StimulusCode", stimulusCode],
  ] as const) {
    if (arr.dims.length !== 2 || arr.dims[0] !== nChars || arr.dims[1] !== nSamples) {
      throw new ConversionError(
        `${name} has dimensions [${arr.dims}], expected [${nChars},${nSamples}]`,
      );
    }
  }
  let stimulusType: MatNumeric | null = null;
  let targetChars: string | null = null;
  if (wantType) {
    stimulusType = expectNumeric(vars, "StimulusType");
    if (stimulusType.dims[0] !== nChars || stimulusType.dims[1] !== nSamples) {
      throw new ConversionError(
        `StimulusType has dimensions [${stimulusType.dims}], expected [${nChars},${nSamples}]`,
      );
    }
    const tc = expectChar(vars, "TargetChar");
    targetChars = tc.rows.join("");
    if (targetChars.length !== nChars) {
      throw new ConversionError(
        `TargetChar has ${targetChars.length} characters for ${nChars} trials`,
      );
    }
  }
  return { nChars, nSamples, nChannels, signal, flashing, stimulusCode, stimulusType, targetChars };
}

function convertSplit(
  arrays: SplitArrays,
  split: "train" | "test",
  labels: string,
  firstTrialId: number,
  perCharCount: { value: number },
): TrialOut[] {
  const { nChars, nSamples, nChannels, signal, flashing, stimulusCode, stimulusType } = arrays;
  const trials: TrialOut[] = [];
  for (let i = 0; i < nChars; i++) {
    const userChar = labels[i]!;
    const target = matrixCodesFor(userChar);
    const onsets: number[] = [];
    const codes: number[] = [];
    const labelCol: number[] = [];
    for (let t = 0; t < nSamples; t++) {
      const on = flashing.data[i + t * nChars]! !== 0;
      const prev = t > 0 && flashing.data[i + (t - 1) * nChars]! !== 0;
      if (!on || prev) continue;
      const code = remapCode(stimulusCode.data[i + t * nChars]!);
      onsets.push(t);
      codes.push(code);
      if (stimulusType !== null) {
        labelCol.push(stimulusType.data[i + t * nChars]! !== 0 ? 1 : 0);
      } else {
        labelCol.push(code === target.rowCode || code === target.colCode ? 1 : 0);
      }
    }
    if (onsets.length === 0) {
      throw new ConversionError(`Flashing marks no intensifications in trial ${i}`);
    }
    if (onsets.length % 12 !== 0) {
      throw new ConversionError(
        `trial ${i} has ${onsets.length} intensifications, not a whole number of rounds`,
      );
    }
    if (perCharCount.value === 0) perCharCount.value = onsets.length;
    if (onsets.length !== perCharCount.value) {
      throw new ConversionError(
        `trial ${i} has ${onsets.length} intensifications, others have ${perCharCount.value}`,
      );
    }
    // column-major [chars x samples x channels] to row-major [channels x samples]
    const raw = new Float64Array(nChannels * nSamples);
    const charStride = nChars;
    const chanStride = nChars * nSamples;
    for (let c = 0; c < nChannels; c++) {
      for (let t = 0; t < nSamples; t++) {
        raw[c * nSamples + t] = signal.data[i + t * charStride + c * chanStride]!;
      }
    }
    trials.push({
      trialId: firstTrialId + i,
      data: znormToF32(raw, nChannels, nSamples),
      nChannels,
      nSamples,
      onsets,
      codes,
      labels: labelCol,
      split,
      meta: { user_char: userChar },
    });
  }
  return trials;
}

export function convertBci3(opts: Bci3Options): Bci3Summary {
  const fsHz = opts.fsHz ?? 240.0;
  const train = loadSplit(opts.trainPath, true);
  const test = loadSplit(opts.testPath, false);
  if (test.nChannels !== train.nChannels) {
    throw new ConversionError(
      `Signal channel counts differ between splits: ${train.nChannels} vs ${test.nChannels}`,
    );
  }
  if (opts.testLabels.length !== test.nChars) {
    throw new ConversionError(
      `testLabels has ${opts.testLabels.length} characters for ${test.nChars} test trials`,
    );
  }
  for (const ch of opts.testLabels) matrixCodesFor(ch);

  const perChar = { value: 0 };
  const trainTrials = convertSplit(train, "train", train.targetChars!, 0, perChar);
  const testTrials = convertSplit(test, "test", opts.testLabels, train.nChars, perChar);
  const channelNames = Array.from({ length: train.nChannels }, (_, c) => `ch${c}`);
  const ds: DatasetOut = {
    paradigm: "p300",
    fs: fsHz,
    channelNames,
    subjectId: opts.subjectId,
    grid: { rows: MATRIX_ROWS.slice() },
    protocol: {
      dataset_id: "bci3-ii",
      flash_s: new PyFloat(0.1),
      soa_s: new PyFloat(0.175),
    },
    trials: [...trainTrials, ...testTrials],
  };
  writeDataset(ds, opts.outPath);
  return {
    datasetId: "bci3-ii",
    subjectId: opts.subjectId,
    trainChars: train.nChars,
    testChars: test.nChars,
    intensificationsPerChar: perChar.value,
    nChannels: train.nChannels,
    fs: fsHz,
  };
}
