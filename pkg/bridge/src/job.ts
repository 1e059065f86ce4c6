import { readFileSync } from "node:fs";

import { writeEmb } from "./emb.js";
import { Encoder, EncodingError } from "./encoder.js";

export interface BridgeJob {
  modelId: string;
  inputPath: string;
  outputPath: string;
  batchSize: number;
  normalize: boolean;
}

export interface EncodeSummary {
  count: number;
  dim: number;
  wallClockMs: number;
}

export function makeJob(partial: Partial<BridgeJob> & Pick<BridgeJob, "modelId" | "inputPath" | "outputPath">): BridgeJob {
  const job: BridgeJob = {
    batchSize: 64,
    normalize: true,
    ...partial,
  };
  if (!Number.isInteger(job.batchSize) || job.batchSize < 1) {
    throw new Error(`batchSize must be a positive integer, got ${job.batchSize}`);
  }
  return job;
}

/** One input line. Trailing newline at EOF does not count as a line. */
export function readLines(path: string): string[] {
  const text = readFileSync(path, "utf8");
  if (text === "") {
    return [];
  }
  const lines = text.split(/\r?\n/);
  if (lines[lines.length - 1] === "" && text.endsWith("\n")) {
    lines.pop();
  }
  return lines;
}

function unitScale(row: Float32Array, line: number): Float32Array {
  let sq = 0;
  for (let j = 0; j < row.length; j++) {
    sq += row[j] * row[j];
  }
  const norm = Math.sqrt(sq);
  if (!Number.isFinite(norm) || norm === 0) {
    throw new EncodingError(line, `cannot normalize, vector norm ${norm}`);
  }
  const out = new Float32Array(row.length);
  for (let j = 0; j < row.length; j++) {
    out[j] = row[j] / norm;
  }
  return out;
}

/**
 * Encode a sentence-per-line file and write the binary embedding file
 * plus its ids sidecar. Ids are 1-based input line numbers, and row
 * order always equals line order regardless of batch size.
 */
export async function encodeFile(job: BridgeJob, encoder: Encoder): Promise<EncodeSummary> {
  const started = Date.now();
  const lines = readLines(job.inputPath);
  if (lines.length === 0) {
    throw new Error(`${job.inputPath}: input is empty`);
  }

  const rows: Float32Array[] = [];
  let dim = 0;
  for (let start = 0; start < lines.length; start += job.batchSize) {
    const batch = lines.slice(start, start + job.batchSize);
    let encoded: Float32Array[];
    try {
      encoded = await encoder.encode(batch);
    } catch (err) {
      throw new EncodingError(start + 1, `batch failed: ${(err as Error).message}`);
    }
    if (encoded.length !== batch.length) {
      throw new EncodingError(start + 1, `backend returned ${encoded.length} rows for ${batch.length} inputs`);
    }
    for (let k = 0; k < encoded.length; k++) {
      const line = start + k + 1;
      let row = encoded[k];
      if (dim === 0) {
        dim = row.length;
      }
      if (row.length !== dim) {
        throw new EncodingError(line, `dim ${row.length}, expected ${dim}`);
      }
      for (let j = 0; j < dim; j++) {
        if (!Number.isFinite(row[j])) {
          throw new EncodingError(line, `non-finite value at component ${j}`);
        }
      }
      if (job.normalize && !encoder.normalizes) {
        row = unitScale(row, line);
      }
      rows.push(row);
    }
  }

  const ids = lines.map((_, i) => String(i + 1));
  writeEmb(job.outputPath, { rows, ids, normalized: job.normalize });
  return { count: rows.length, dim, wallClockMs: Date.now() - started };
}
