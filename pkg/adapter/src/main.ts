#!/usr/bin/env node
/** Entry point: `main.js serve [--epochs N] [--seed N] [--lr X]`. */

import { parseArgs } from "node:util";
import { serve } from "./serve.js";
import { defaultConfig } from "./trainer.js";

const USAGE = "usage: main.js serve [--epochs N] [--seed N] [--lr X]\n";

async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  if (command !== "serve") {
    process.stderr.write(USAGE);
    return 2;
  }
  let values;
  try {
    ({ values } = parseArgs({
      args: rest,
      options: {
        epochs: { type: "string", default: "10" },
        seed: { type: "string", default: "0" },
        lr: { type: "string", default: "0.01" },
      },
    }));
  } catch (err) {
    process.stderr.write(`${err instanceof Error ? err.message : err}\n${USAGE}`);
    return 2;
  }
  const cfg = defaultConfig({
    baseEpochs: Number(values.epochs),
    seed: Number(values.seed),
    lr: Number(values.lr),
  });
  await serve(cfg, process.stdin, process.stdout);
  return 0;
}

main(process.argv.slice(2)).then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(`${err instanceof Error ? err.stack : err}\n`);
    process.exit(1);
  },
);
