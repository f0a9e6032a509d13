#!/usr/bin/env node
/** Command line entry: one subcommand per source dataset. */

import { parseArgs } from "node:util";
import { convertAls } from "./als.js";
import { convertBci3 } from "./bci3.js";
import { convertSsvepBench } from "./ssvepBench.js";
import { ConversionError, MatFormatError } from "./errors.js";

const USAGE = `usage:
  spellersec-convert bci3-ii --train FILE --test FILE --labels TEXT --out DIR --subject ID
  spellersec-convert als-008-2014 --in FILE --out DIR --subject ID [--train-chars N] [--target-text TEXT]
  spellersec-convert ssvep-benchmark --in FILE --out DIR --subject ID`;

function required(values: Record<string, string | undefined>, names: string[]): void {
  for (const name of names) {
    if (values[name] === undefined) {
      throw new UsageError(`missing --${name}`);
    }
  }
}

class UsageError extends Error {}

export function main(argv: string[]): number {
  try {
    const command = argv[0];
    const rest = argv.slice(1);
    if (command === "bci3-ii") {
      const { values } = parseArgs({
        args: rest,
        options: {
          train: { type: "string" },
          test: { type: "string" },
          labels: { type: "string" },
          out: { type: "string" },
          subject: { type: "string" },
        },
      });
      required(values, ["train", "test", "labels", "out", "subject"]);
      const summary = convertBci3({
        trainPath: values.train!,
        testPath: values.test!,
        testLabels: values.labels!,
        outPath: values.out!,
        subjectId: values.subject!,
      });
      process.stdout.write(JSON.stringify(summary, null, 2) + "\n");
      return 0;
    }
    if (command === "als-008-2014") {
      const { values } = parseArgs({
        args: rest,
        options: {
          in: { type: "string" },
          out: { type: "string" },
          subject: { type: "string" },
          "train-chars": { type: "string" },
          "target-text": { type: "string" },
        },
      });
      required(values, ["in", "out", "subject"]);
      const summary = convertAls({
        path: values.in!,
        outPath: values.out!,
        subjectId: values.subject!,
        trainChars: values["train-chars"] !== undefined ? Number(values["train-chars"]) : undefined,
        targetText: values["target-text"],
      });
      process.stdout.write(JSON.stringify(summary, null, 2) + "\n");
      return 0;
    }
    if (command === "ssvep-benchmark") {
      const { values } = parseArgs({
        args: rest,
        options: {
          in: { type: "string" },
          out: { type: "string" },
          subject: { type: "string" },
        },
      });
      required(values, ["in", "out", "subject"]);
      const summary = convertSsvepBench({
        path: values.in!,
        outPath: values.out!,
        subjectId: values.subject!,
      });
      process.stdout.write(JSON.stringify(summary, null, 2) + "\n");
      return 0;
    }
    process.stderr.write(USAGE + "\n");
    return 2;
  } catch (err) {
    if (err instanceof UsageError || (err as { code?: string }).code?.startsWith("ERR_PARSE_ARGS")) {
      process.stderr.write(`error: ${(err as Error).message}\n${USAGE}\n`);
      return 2;
    }
    if (err instanceof ConversionError || err instanceof MatFormatError) {
      process.stderr.write(`error: ${(err as Error).message}\n`);
      return 1;
    }
    if ((err as NodeJS.ErrnoException).code === "ENOENT") {
      process.stderr.write(`error: ${(err as Error).message}\n`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
