import { createHash } from "node:crypto";
import { renameSync, writeFileSync } from "node:fs";
import { basename, dirname, join } from "node:path";

// Binary layout shared with the Python reader:
//   magic "EMB1" | version u32 | dim u32 | count u64 | flags u32, all LE,
// followed by count*dim float32 row-major. flags bit0 = rows are unit length.
const MAGIC = "EMB1";
const VERSION = 1;
const HEADER_BYTES = 4 + 4 + 4 + 8 + 4;

export interface EmbFile {
  rows: Float32Array[];
  ids: string[];
  normalized: boolean;
}

export function encodeHeader(dim: number, count: number, normalized: boolean): Buffer {
  const buf = Buffer.alloc(HEADER_BYTES);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(dim, 8);
  buf.writeBigUInt64LE(BigInt(count), 12);
  buf.writeUInt32LE(normalized ? 1 : 0, 20);
  return buf;
}

export function encodePayload(file: EmbFile): Buffer {
  if (file.rows.length !== file.ids.length) {
    throw new Error(
      `row/id count mismatch: ${file.rows.length} rows, ${file.ids.length} ids`,
    );
  }
  const dim = file.rows.length > 0 ? file.rows[0].length : 0;
  const header = encodeHeader(dim, file.rows.length, file.normalized);
  const body = Buffer.alloc(file.rows.length * dim * 4);
  for (let i = 0; i < file.rows.length; i++) {
    const row = file.rows[i];
    if (row.length !== dim) {
      throw new Error(`row ${i}: dim ${row.length}, expected ${dim}`);
    }
    for (let j = 0; j < dim; j++) {
      body.writeFloatLE(row[j], (i * dim + j) * 4);
    }
  }
  return Buffer.concat([header, body]);
}

export function sidecarLines(ids: string[]): string {
  return ids.map((id, row) => JSON.stringify({ row, id })).join("\n") + "\n";
}

function writeAtomic(path: string, data: Buffer | string): void {
  const tmp = join(dirname(path), `.${basename(path)}.tmp-${process.pid}`);
  writeFileSync(tmp, data);
  renameSync(tmp, path);
}

/** Write the payload and its `<path>.ids.jsonl` sidecar, atomically. */
export function writeEmb(path: string, file: EmbFile): void {
  writeAtomic(path, encodePayload(file));
  writeAtomic(`${path}.ids.jsonl`, sidecarLines(file.ids));
}

export function payloadSha256(file: EmbFile): string {
  return createHash("sha256").update(encodePayload(file)).digest("hex");
}
