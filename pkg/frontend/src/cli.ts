/** Command line: train a miniature classifier and export its bundle. */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { trainAndExport } from "./export.js";
import { Arch } from "./train.js";

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .command("train-and-export", "train a model and write its weight file and golden set")
    .demandCommand(1)
    .option("arch", { choices: ["fnn", "rnn", "lstm"] as const, demandOption: true })
    .option("frames", { type: "number", default: 4 })
    .option("hidden", { type: "number", default: 8 })
    .option("seed", { type: "number", default: 0 })
    .option("epochs", { type: "number", default: 40 })
    .option("out", { type: "string", demandOption: true })
    .strict()
    .parse();

  const bundle = await trainAndExport(
    {
      arch: argv.arch as Arch,
      frames: argv.frames,
      hidden: argv.hidden,
      seed: argv.seed,
      epochs: argv.epochs,
    },
    argv.out
  );
  console.log(
    `exported ${bundle.weightFile} (accuracy ${bundle.accuracy.toFixed(3)}), golden ${bundle.goldenFile}`
  );
}

main().catch((err) => {
  console.error(err instanceof Error ? err.message : err);
  process.exit(1);
});
