import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { convertAls } from "../src/als.js";
import { readDataset, znormToF32 } from "../src/canonical.js";
import { bedsideSession, matrixChars } from "./fixtures.js";
import { writeMat } from "./matWriter.js";

// documented split: 35 spelled characters, 21 train and 14 test, 8 channels
const CHARS = matrixChars(35, 1);

let workDir: string;
let outDir: string;
let session: ReturnType<typeof bedsideSession>;
let summary: ReturnType<typeof convertAls>;

beforeAll(() => {
  workDir = fs.mkdtempSync(path.join(os.tmpdir(), "als-"));
  session = bedsideSession({
    chars: CHARS,
    rounds: 10,
    flashSamples: 32,
    gapSamples: 32,
    tailSamples: 128,
    fs: 256,
    seed: 21,
    withTarget: true,
  });
  fs.writeFileSync(path.join(workDir, "subject.mat"), session.buf);
  outDir = path.join(workDir, "out");
  summary = convertAls({
    path: path.join(workDir, "subject.mat"),
    outPath: outDir,
    subjectId: "S1",
  });
}, 120_000);

afterAll(() => {
  fs.rmSync(workDir, { recursive: true, force: true });
});

describe("bedside converter", () => {
  it("reports the documented counts", () => {
    expect(summary.trainChars).toBe(21);
    expect(summary.testChars).toBe(14);
    expect(summary.nChannels).toBe(8);
    expect(summary.fs).toBe(256);
  });

  it("emitted dataset validates with the documented splits", () => {
    const ds = readDataset(outDir);
    expect(ds.paradigm).toBe("p300");
    expect(ds.fs).toBe(256);
    expect(ds.channelNames).toEqual(["FZ", "CZ", "PZ", "OZ", "P3", "P4", "PO7", "PO8"]);
    expect(ds.trials).toHaveLength(35);
    expect(ds.trials.filter((t) => t.split === "train")).toHaveLength(21);
    expect(ds.trials.filter((t) => t.split === "test")).toHaveLength(14);
    for (let i = 0; i < 35; i++) {
      const t = ds.trials[i]!;
      expect(t.meta.user_char).toBe(CHARS[i]);
      expect(t.onsets).toHaveLength(120);
      expect(t.labels.reduce((a, b) => a + b, 0)).toBe(20);
      expect(Math.min(...t.codes)).toBeGreaterThanOrEqual(1);
      expect(Math.max(...t.codes)).toBeLessThanOrEqual(12);
    }
  });

  it("payloads are the z-normalized segment samples, bit for bit", () => {
    const ds = readDataset(outDir);
    const t0 = ds.trials[0]!;
    const segStart = session.trialStarts[0]! - 1;
    const segEnd = session.trialStarts[1]! - 1;
    const nSamples = segEnd - segStart;
    const raw = new Float64Array(8 * nSamples);
    for (let c = 0; c < 8; c++) {
      for (let s = 0; s < nSamples; s++) {
        raw[c * nSamples + s] = session.x[segStart + s + c * session.nSamplesTotal]!;
      }
    }
    const expected = znormToF32(raw, 8, nSamples);
    const bytes = Buffer.alloc(expected.length * 4);
    expected.forEach((v, i) => bytes.writeFloatLE(v, 4 * i));
    expect(t0.payload.equals(bytes)).toBe(true);
  });

  it("the split boundary is adjustable", () => {
    const alt = path.join(workDir, "alt");
    const s = convertAls({
      path: path.join(workDir, "subject.mat"),
      outPath: alt,
      subjectId: "S1",
      trainChars: 30,
    });
    expect(s.trainChars).toBe(30);
    expect(s.testChars).toBe(5);
    fs.rmSync(alt, { recursive: true, force: true });
  });

  it("a session without spelled text needs the override", () => {
    const bare = bedsideSession({
      chars: CHARS.slice(0, 4),
      rounds: 2,
      flashSamples: 8,
      gapSamples: 8,
      tailSamples: 16,
      fs: 256,
      seed: 22,
      withTarget: false,
    });
    const p = path.join(workDir, "bare.mat");
    fs.writeFileSync(p, bare.buf);
    expect(() =>
      convertAls({ path: p, outPath: path.join(workDir, "never"), subjectId: "S2" }),
    ).toThrow(/field target missing/);
    const s = convertAls({
      path: p,
      outPath: path.join(workDir, "bare-out"),
      subjectId: "S2",
      targetText: CHARS.slice(0, 4),
      trainChars: 2,
    });
    expect(s.trainChars + s.testChars).toBe(4);
  });

  it("re-running the conversion is byte-identical", () => {
    const again = path.join(workDir, "again");
    convertAls({ path: path.join(workDir, "subject.mat"), outPath: again, subjectId: "S1" });
    for (const rel of ["manifest.json", "events.csv", "trials/trial_00000.f32", "trials/trial_00034.f32"]) {
      expect(
        fs.readFileSync(path.join(outDir, rel)).equals(fs.readFileSync(path.join(again, rel))),
      ).toBe(true);
    }
    fs.rmSync(again, { recursive: true, force: true });
  });

  it("names a missing struct field", () => {
    const buf = writeMat({
      data: {
        kind: "struct",
        fields: {
          X: { kind: "double", dims: [16, 8], data: new Float64Array(128).fill(1).map((_, i) => i % 7) },
          y: { kind: "double", dims: [16, 1], data: new Float64Array(16) },
          trial: { kind: "double", dims: [1, 2], data: [1, 9] },
          fs: { kind: "double", dims: [1, 1], data: [256] },
          target: { kind: "char", text: "AB" },
        },
      },
    });
    const p = path.join(workDir, "broken.mat");
    fs.writeFileSync(p, buf);
    expect(() =>
      convertAls({ path: p, outPath: path.join(workDir, "never"), subjectId: "S3" }),
    ).toThrow(/data struct has no field y_stim/);
  });
});
