#!/usr/bin/env node
/**
 * blmvae-extract: emit EMB1 embedding stores from pretrained checkpoints.
 *
 *   extract --model <id> --data <jsonl> --out <store> [--batch 32] [--dim 768]
 *   verify  --store <store> --data <jsonl>
 */

import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { TransformersJsEncoder } from "./encoder.js";
import { extract, verifyStore } from "./extract.js";

function parseFlags(argv: string[]): Record<string, string> {
  const flags: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new Error(`bad arguments near ${key}`);
    }
    flags[key.slice(2)] = value;
  }
  return flags;
}

function usage(): void {
  console.error(
    "usage: blmvae-extract extract --model <id> --data <jsonl> --out <store> " +
      "[--batch 32] [--dim 768]\n" +
      "       blmvae-extract verify --store <store> --data <jsonl>",
  );
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  let flags: Record<string, string>;
  try {
    flags = parseFlags(rest);
  } catch (e) {
    console.error(String(e));
    usage();
    return 2;
  }

  if (command === "extract") {
    if (!flags.model || !flags.data || !flags.out) {
      usage();
      return 2;
    }
    const expectedDim = flags.dim ? Number(flags.dim) : undefined;
    const encoder = await TransformersJsEncoder.load(flags.model, expectedDim);
    const summary = await extract(
      {
        dataPath: flags.data,
        outPath: flags.out,
        batchSize: flags.batch ? Number(flags.batch) : undefined,
        log: (msg) => console.error(msg),
      },
      encoder,
    );
    console.log(
      `OK, ${summary.count} vectors (dim ${summary.dim}), ` +
        `${summary.truncated.length} truncated`,
    );
    return 0;
  }

  if (command === "verify") {
    if (!flags.store || !flags.data) {
      usage();
      return 2;
    }
    const report = verifyStore(flags.store, flags.data);
    if (report.ok) {
      console.log(`OK, ${report.covered} ids covered (dim ${report.dim})`);
      return 0;
    }
    for (const id of report.missing) {
      console.error(`missing: ${id}`);
    }
    for (const id of report.nonFiniteRows) {
      console.error(`non-finite row: ${id}`);
    }
    return 1;
  }

  usage();
  return 2;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  path.resolve(process.argv[1]) === fileURLToPath(import.meta.url);
if (invokedDirectly) {
  main(process.argv.slice(2)).then(
    (code) => process.exit(code),
    (err) => {
      console.error(String(err));
      process.exit(1);
    },
  );
}
