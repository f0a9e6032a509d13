/** On-screen layouts and channel tables shared by the converters. */

import { JsonValue, PyFloat } from "./canonical.js";
import { ConversionError } from "./errors.js";

/** 6x6 character matrix of the row/column speller. */
export const MATRIX_ROWS = ["ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_"];

/** Canonical event codes: 1..6 rows top to bottom, 7..12 columns left to right. */
export function matrixCodesFor(ch: string): { rowCode: number; colCode: number } {
  for (let r = 0; r < MATRIX_ROWS.length; r++) {
    const c = MATRIX_ROWS[r]!.indexOf(ch);
    if (c >= 0) return { rowCode: r + 1, colCode: c + 7 };
  }
  throw new ConversionError(`character ${JSON.stringify(ch)} not in the matrix`);
}

/** 40-target keyboard: row-major characters with their flicker frequencies. */
export const KEYBOARD_ROWS = ["ABCDEFGH", "IJKLMNOP", "QRSTUVWX", "YZ012345", "6789_,.<"];

export const KEYBOARD_CHARACTERS = KEYBOARD_ROWS.join("").split("");

export const KEYBOARD_FREQUENCIES: number[] = (() => {
  const out: number[] = [];
  for (let r = 0; r < 5; r++) {
    for (let c = 0; c < 8; c++) {
      // columns step by 1 Hz from 8, rows offset by 0.2 Hz
      out.push(Math.round((8.0 + c + 0.2 * r) * 10) / 10);
    }
  }
  return out;
})();

export function keyboardGridDict(): { [key: string]: JsonValue } {
  return {
    schema_version: 1,
    rows: KEYBOARD_ROWS.slice(),
    characters: KEYBOARD_CHARACTERS.slice(),
    frequencies_hz: KEYBOARD_FREQUENCIES.map((f) => new PyFloat(f)),
  };
}

/** Parietal/occipital subset used for frequency decoding, in output order. */
export const OCCIPITAL_CHANNEL_NAMES = [
  "PZ", "PO5", "PO3", "POZ", "PO4", "PO6", "O1", "OZ", "O2",
];

/** 0-based positions of that subset within the 64-channel recording montage. */
export const OCCIPITAL_CHANNEL_INDICES = [47, 53, 54, 55, 56, 57, 60, 61, 62];

/** Electrode set of the 8-channel bedside recordings. */
export const BEDSIDE_CHANNEL_NAMES = ["FZ", "CZ", "PZ", "OZ", "P3", "P4", "PO7", "PO8"];
