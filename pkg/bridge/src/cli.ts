#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { createEncoder, EncodingError, ModelLoadError } from "./encoder.js";
import { encodeFile, makeJob } from "./job.js";

async function runEncode(argv: {
  model: string;
  in: string;
  out: string;
  batch: number;
  normalize: boolean;
}): Promise<void> {
  const job = makeJob({
    modelId: argv.model,
    inputPath: argv.in,
    outputPath: argv.out,
    batchSize: argv.batch,
    normalize: argv.normalize,
  });
  process.stderr.write(`loading ${job.modelId}...\n`);
  const encoder = await createEncoder(job.modelId);
  const summary = await encodeFile(job, encoder);
  console.log(
    `encoded ${summary.count} lines -> ${job.outputPath} (dim ${summary.dim}, ${summary.wallClockMs} ms)`,
  );
}

export async function main(args: string[]): Promise<number> {
  try {
    await yargs(args)
      .scriptName("bridge")
      .command(
        "encode",
        "encode a sentence-per-line file to a binary embedding file",
        (y) =>
          y
            .option("model", { type: "string", demandOption: true, describe: "model id, or hash:<dim> for the built-in deterministic encoder" })
            .option("in", { type: "string", demandOption: true, describe: "input text file, one sentence per line" })
            .option("out", { type: "string", demandOption: true, describe: "output .emb path; ids sidecar lands next to it" })
            .option("batch", { type: "number", default: 64, describe: "encode batch size (throughput only, never changes values)" })
            .option("normalize", { type: "boolean", default: true }),
        (argv) => runEncode(argv as any),
      )
      .demandCommand(1, "specify a command")
      .strict()
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parseAsync();
    return 0;
  } catch (err) {
    if (err instanceof ModelLoadError) {
      // a failed model import can leave a duplicate rejection of the same
      // error floating in the module graph; once reported it must not
      // crash the exiting process as a second raw stack
      process.on("unhandledRejection", () => {});
    }
    if (err instanceof ModelLoadError || err instanceof EncodingError) {
      console.error(`bridge: error: ${err.message}`);
    } else {
      console.error(`bridge: error: ${(err as Error).message}`);
    }
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("bridge")) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
