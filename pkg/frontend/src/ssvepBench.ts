/** 40-target frequency-speller benchmark recordings to the canonical layout.

One source file per subject holds ``data`` [64 x samples x 40 x 6] at
250 Hz: six blocks of all forty targets, 0.5 s of pre-stimulus cue before
the flicker. Only the nine parietal/occipital channels are kept, each
trial z-normalized per channel, stimulation coded as target index + 1.
Trials are ordered block-major to match the natively written datasets.
*/

import { ConversionError } from "./errors.js";
import { DatasetOut, PyFloat, TrialOut, writeDataset, znormToF32 } from "./canonical.js";
import {
  KEYBOARD_CHARACTERS,
  OCCIPITAL_CHANNEL_INDICES,
  OCCIPITAL_CHANNEL_NAMES,
  keyboardGridDict,
} from "./grids.js";
import { expectNumeric, parseMat } from "./mat.js";
import * as fs from "node:fs";

export interface SsvepBenchOptions {
  path: string;
  outPath: string;
  subjectId: string;
  fsHz?: number;
  /** samples of cue before flicker onset, 0.5 s at the native rate */
  prestimSamples?: number;
}

export interface SsvepBenchSummary {
  datasetId: "ssvep-benchmark";
  subjectId: string;
  nBlocks: number;
  nTargets: number;
  nChannels: number;
  nSamples: number;
  fs: number;
}

export function convertSsvepBench(opts: SsvepBenchOptions): SsvepBenchSummary {
  const fsHz = opts.fsHz ?? 250.0;
  const prestim = opts.prestimSamples ?? 125;
  const vars = parseMat(fs.readFileSync(opts.path));
  const data = expectNumeric(vars, "data");
  if (data.dims.length !== 4) {
    throw new ConversionError(`data has ${data.dims.length} dimensions, expected 4`);
  }
  const [nChanSrc, nSamples, nTargets, nBlocks] = data.dims as [number, number, number, number];
  if (nTargets !== KEYBOARD_CHARACTERS.length) {
    throw new ConversionError(`data has ${nTargets} targets, expected ${KEYBOARD_CHARACTERS.length}`);
  }
  if (nBlocks !== 6) {
    throw new ConversionError(`data has ${nBlocks} blocks, expected 6`);
  }
  const maxIndex = Math.max(...OCCIPITAL_CHANNEL_INDICES);
  if (nChanSrc <= maxIndex) {
    throw new ConversionError(
      `data has ${nChanSrc} channels, montage subset needs at least ${maxIndex + 1}`,
    );
  }
  if (prestim < 0 || prestim >= nSamples) {
    throw new ConversionError(`prestimSamples ${prestim} outside 0..${nSamples - 1}`);
  }

  const nCh = OCCIPITAL_CHANNEL_INDICES.length;
  const targetStride = nChanSrc * nSamples;
  const blockStride = targetStride * nTargets;
  const trials: TrialOut[] = [];
  for (let b = 0; b < nBlocks; b++) {
    for (let k = 0; k < nTargets; k++) {
      const base = b * blockStride + k * targetStride;
      const raw = new Float64Array(nCh * nSamples);
      for (let c = 0; c < nCh; c++) {
        const src = OCCIPITAL_CHANNEL_INDICES[c]!;
        for (let t = 0; t < nSamples; t++) {
          raw[c * nSamples + t] = data.data[base + src + t * nChanSrc]!;
        }
      }
      trials.push({
        trialId: b * nTargets + k,
        data: znormToF32(raw, nCh, nSamples),
        nChannels: nCh,
        nSamples,
        onsets: [prestim],
        codes: [k + 1],
        labels: [-1],
        split: "all",
        meta: {
          block: b,
          character: KEYBOARD_CHARACTERS[k]!,
          freq_index: k,
          onset_sample: prestim,
        },
      });
    }
  }

  const ds: DatasetOut = {
    paradigm: "ssvep",
    fs: fsHz,
    channelNames: OCCIPITAL_CHANNEL_NAMES.slice(),
    subjectId: opts.subjectId,
    grid: keyboardGridDict(),
    protocol: {
      dataset_id: "ssvep-benchmark",
      cue_s: new PyFloat(0.5),
    },
    trials,
  };
  writeDataset(ds, opts.outPath);
  return {
    datasetId: "ssvep-benchmark",
    subjectId: opts.subjectId,
    nBlocks,
    nTargets,
    nChannels: nCh,
    nSamples,
    fs: fsHz,
  };
}
