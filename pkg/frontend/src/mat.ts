/** Minimal MAT v5 reader.

Covers what the source recordings actually use: little-endian files,
numeric arrays (any integer/float storage width), character arrays, cell
and struct arrays, and zlib-compressed elements. Sparse, complex, and
objects are rejected. Numeric payloads come back as Float64Array in the
file's column-major order with the dimension vector alongside.
*/

import { inflateSync } from "node:zlib";
import { MatFormatError } from "./errors.js";

const MI_INT8 = 1;
const MI_UINT8 = 2;
const MI_INT16 = 3;
const MI_UINT16 = 4;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_SINGLE = 7;
const MI_DOUBLE = 9;
const MI_INT64 = 12;
const MI_UINT64 = 13;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;
const MI_UTF8 = 16;
const MI_UTF16 = 17;

const MX_CELL = 1;
const MX_STRUCT = 2;
const MX_OBJECT = 3;
const MX_CHAR = 4;
const MX_SPARSE = 5;
const MX_DOUBLE = 6;
const MX_SINGLE = 7;
const MX_INT8 = 8;
const MX_UINT8 = 9;
const MX_INT16 = 10;
const MX_UINT16 = 11;
const MX_INT32 = 12;
const MX_UINT32 = 13;

export interface MatNumeric {
  kind: "numeric";
  dims: number[];
  /** column-major, length = product of dims */
  data: Float64Array;
}

export interface MatChar {
  kind: "char";
  dims: number[];
  /** one string per matrix row, columns joined in order */
  rows: string[];
}

export interface MatStruct {
  kind: "struct";
  dims: number[];
  /** field name -> one value per struct element */
  fields: Map<string, MatValue[]>;
}

export interface MatCell {
  kind: "cell";
  dims: number[];
  items: MatValue[];
}

export type MatValue = MatNumeric | MatChar | MatStruct | MatCell;

interface Cursor {
  buf: Buffer;
  off: number;
}

function need(c: Cursor, count: number, what: string): number {
  if (c.off + count > c.buf.length) {
    throw new MatFormatError(
      `truncated file: ${what} needs ${count} bytes at offset ${c.off}, have ${c.buf.length}`,
    );
  }
  const at = c.off;
  c.off += count;
  return at;
}

interface Tag {
  type: number;
  nBytes: number;
  dataOff: number;
  /** offset just past the element, padding included */
  endOff: number;
}

function readTag(c: Cursor): Tag {
  const at = need(c, 8, "element tag");
  const word = c.buf.readUInt32LE(at);
  if ((word & 0xffff0000) !== 0) {
    // small element: length packed in the tag's upper half, data in situ
    const nBytes = word >>> 16;
    if (nBytes > 4) {
      throw new MatFormatError(`small element claims ${nBytes} bytes at offset ${at}`);
    }
    return { type: word & 0xffff, nBytes, dataOff: at + 4, endOff: at + 8 };
  }
  const nBytes = c.buf.readUInt32LE(at + 4);
  const dataOff = at + 8;
  if (dataOff + nBytes > c.buf.length) {
    throw new MatFormatError(
      `truncated file: element data needs ${nBytes} bytes at offset ${dataOff}, have ${c.buf.length}`,
    );
  }
  // compressed elements are stored back to back; everything else pads to 8,
  // except that files may end without the final padding
  const padded = word === MI_COMPRESSED ? nBytes : (nBytes + 7) & ~7;
  const endOff = Math.min(dataOff + padded, c.buf.length);
  c.off = endOff;
  return { type: word, nBytes, dataOff, endOff };
}

const ELEMENT_WIDTH: Record<number, number> = {
  [MI_INT8]: 1,
  [MI_UINT8]: 1,
  [MI_INT16]: 2,
  [MI_UINT16]: 2,
  [MI_INT32]: 4,
  [MI_UINT32]: 4,
  [MI_SINGLE]: 4,
  [MI_DOUBLE]: 8,
  [MI_INT64]: 8,
  [MI_UINT64]: 8,
};

function numericData(buf: Buffer, tag: Tag): Float64Array {
  const width = ELEMENT_WIDTH[tag.type];
  if (width === undefined) {
    throw new MatFormatError(`unsupported numeric storage type ${tag.type}`);
  }
  if (tag.nBytes % width !== 0) {
    throw new MatFormatError(
      `storage type ${tag.type} with ${tag.nBytes} bytes is not a whole element count`,
    );
  }
  const n = tag.nBytes / width;
  const out = new Float64Array(n);
  const o = tag.dataOff;
  switch (tag.type) {
    case MI_INT8:
      for (let i = 0; i < n; i++) out[i] = buf.readInt8(o + i);
      break;
    case MI_UINT8:
      for (let i = 0; i < n; i++) out[i] = buf.readUInt8(o + i);
      break;
    case MI_INT16:
      for (let i = 0; i < n; i++) out[i] = buf.readInt16LE(o + 2 * i);
      break;
    case MI_UINT16:
      for (let i = 0; i < n; i++) out[i] = buf.readUInt16LE(o + 2 * i);
      break;
    case MI_INT32:
      for (let i = 0; i < n; i++) out[i] = buf.readInt32LE(o + 4 * i);
      break;
    case MI_UINT32:
      for (let i = 0; i < n; i++) out[i] = buf.readUInt32LE(o + 4 * i);
      break;
    case MI_SINGLE:
      for (let i = 0; i < n; i++) out[i] = buf.readFloatLE(o + 4 * i);
      break;
    case MI_DOUBLE:
      for (let i = 0; i < n; i++) out[i] = buf.readDoubleLE(o + 8 * i);
      break;
    case MI_INT64:
      for (let i = 0; i < n; i++) out[i] = Number(buf.readBigInt64LE(o + 8 * i));
      break;
    case MI_UINT64:
      for (let i = 0; i < n; i++) out[i] = Number(buf.readBigUInt64LE(o + 8 * i));
      break;
  }
  return out;
}

function charRows(buf: Buffer, tag: Tag, dims: number[]): string[] {
  let units: number[];
  if (tag.type === MI_UINT16 || tag.type === MI_UTF16) {
    units = [];
    for (let i = 0; i < tag.nBytes / 2; i++) {
      units.push(buf.readUInt16LE(tag.dataOff + 2 * i));
    }
  } else if (tag.type === MI_UINT8 || tag.type === MI_INT8 || tag.type === MI_UTF8) {
    // multi-byte UTF-8 would break the column-major transpose below;
    // the recordings only carry ASCII names and spelled characters
    units = [];
    for (let i = 0; i < tag.nBytes; i++) {
      const b = buf.readUInt8(tag.dataOff + i);
      if (b > 0x7f) {
        throw new MatFormatError("non-ASCII byte in char array");
      }
      units.push(b);
    }
  } else {
    throw new MatFormatError(`unsupported char storage type ${tag.type}`);
  }
  const m = dims[0] ?? 0;
  const nCols = m === 0 ? 0 : units.length / m;
  const rows: string[] = [];
  for (let r = 0; r < m; r++) {
    let s = "";
    for (let col = 0; col < nCols; col++) {
      s += String.fromCharCode(units[col * m + r]!);
    }
    rows.push(s);
  }
  return rows;
}

function readSubElement(c: Cursor, expected: number, what: string): Tag {
  const tag = readTag(c);
  if (tag.type !== expected) {
    throw new MatFormatError(`${what}: expected storage type ${expected}, got ${tag.type}`);
  }
  c.off = tag.endOff;
  return tag;
}

function readMatrix(c: Cursor): { name: string; value: MatValue } {
  const flagsTag = readSubElement(c, MI_UINT32, "array flags");
  if (flagsTag.nBytes !== 8) {
    throw new MatFormatError(`array flags must be 8 bytes, got ${flagsTag.nBytes}`);
  }
  const flagsWord = c.buf.readUInt32LE(flagsTag.dataOff);
  const cls = flagsWord & 0xff;
  if ((flagsWord & 0x0800) !== 0) {
    throw new MatFormatError("complex arrays are not supported");
  }

  const dimsTag = readSubElement(c, MI_INT32, "dimensions");
  const dims: number[] = [];
  for (let i = 0; i < dimsTag.nBytes / 4; i++) {
    dims.push(c.buf.readInt32LE(dimsTag.dataOff + 4 * i));
  }
  const count = dims.reduce((a, b) => a * b, 1);

  const nameTag = readTag(c);
  if (nameTag.type !== MI_INT8 && nameTag.type !== MI_UINT8) {
    throw new MatFormatError(`array name: expected int8 storage, got ${nameTag.type}`);
  }
  c.off = nameTag.endOff;
  const name = c.buf.toString("latin1", nameTag.dataOff, nameTag.dataOff + nameTag.nBytes);

  if (cls === MX_CHAR) {
    const dataTag = readTag(c);
    c.off = dataTag.endOff;
    return { name, value: { kind: "char", dims, rows: charRows(c.buf, dataTag, dims) } };
  }

  if (cls === MX_CELL) {
    const items: MatValue[] = [];
    for (let i = 0; i < count; i++) {
      items.push(readElement(c, "cell item").value);
    }
    return { name, value: { kind: "cell", dims, items } };
  }

  if (cls === MX_STRUCT) {
    const lenTag = readSubElement(c, MI_INT32, "field name length");
    const nameLen = c.buf.readInt32LE(lenTag.dataOff);
    const namesTag = readTag(c);
    c.off = namesTag.endOff;
    const nFields = nameLen > 0 ? namesTag.nBytes / nameLen : 0;
    const fieldNames: string[] = [];
    for (let i = 0; i < nFields; i++) {
      const start = namesTag.dataOff + i * nameLen;
      const raw = c.buf.toString("latin1", start, start + nameLen);
      const nul = raw.indexOf("\0");
      fieldNames.push(nul >= 0 ? raw.slice(0, nul) : raw);
    }
    const fields = new Map<string, MatValue[]>(fieldNames.map((f) => [f, []]));
    for (let el = 0; el < count; el++) {
      for (const f of fieldNames) {
        fields.get(f)!.push(readElement(c, `field ${f}`).value);
      }
    }
    return { name, value: { kind: "struct", dims, fields } };
  }

  if (cls === MX_OBJECT || cls === MX_SPARSE) {
    throw new MatFormatError(`unsupported array class ${cls}`);
  }
  if (cls < MX_DOUBLE || cls > MX_UINT32) {
    throw new MatFormatError(`unknown array class ${cls}`);
  }

  const dataTag = readTag(c);
  c.off = dataTag.endOff;
  const data = numericData(c.buf, dataTag);
  if (data.length !== count) {
    throw new MatFormatError(
      `array ${name || "<unnamed>"}: ${data.length} stored values for dimensions [${dims}]`,
    );
  }
  return { name, value: { kind: "numeric", dims, data } };
}

function readElement(c: Cursor, what: string): { name: string; value: MatValue } {
  const tag = readTag(c);
  if (tag.type === MI_COMPRESSED) {
    c.off = tag.endOff;
    let inflated: Buffer;
    try {
      inflated = inflateSync(c.buf.subarray(tag.dataOff, tag.dataOff + tag.nBytes));
    } catch (err) {
      throw new MatFormatError(`bad compressed element: ${(err as Error).message}`);
    }
    return readElement({ buf: inflated, off: 0 }, what);
  }
  if (tag.type !== MI_MATRIX) {
    throw new MatFormatError(`${what}: expected a matrix element, got type ${tag.type}`);
  }
  const inner: Cursor = { buf: c.buf, off: tag.dataOff };
  const out = readMatrix(inner);
  c.off = tag.endOff;
  return out;
}

/** Parse a whole file into its top-level variables. */
export function parseMat(buf: Buffer): Map<string, MatValue> {
  if (buf.length < 128) {
    throw new MatFormatError(`file too short for a header: ${buf.length} bytes`);
  }
  const version = buf.readUInt16LE(124);
  const endian = buf.toString("latin1", 126, 128);
  if (endian === "MI") {
    throw new MatFormatError("big-endian files are not supported");
  }
  if (endian !== "IM" || version !== 0x0100) {
    throw new MatFormatError(
      `not a v5 file (version 0x${version.toString(16)}, endian ${JSON.stringify(endian)})`,
    );
  }
  const c: Cursor = { buf, off: 128 };
  const out = new Map<string, MatValue>();
  while (c.off < buf.length) {
    const { name, value } = readElement(c, "top-level variable");
    out.set(name, value);
  }
  return out;
}

/** Fetch a variable and insist on its kind, naming the field on failure. */
export function expectNumeric(vars: Map<string, MatValue>, name: string): MatNumeric {
  const v = vars.get(name);
  if (v === undefined) throw new MatFormatError(`missing variable ${name}`);
  if (v.kind !== "numeric") throw new MatFormatError(`variable ${name} is ${v.kind}, expected numeric`);
  return v;
}

export function expectChar(vars: Map<string, MatValue>, name: string): MatChar {
  const v = vars.get(name);
  if (v === undefined) throw new MatFormatError(`missing variable ${name}`);
  if (v.kind !== "char") throw new MatFormatError(`variable ${name} is ${v.kind}, expected char`);
  return v;
}
