import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it } from "vitest";

import { createEncoder, Encoder, EncodingError, HashEncoder, ModelLoadError } from "../src/encoder.js";
import { encodeFile, makeJob, readLines } from "../src/job.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

let dir: string;

beforeAll(() => {
  dir = mkdtempSync(join(tmpdir(), "encode-"));
});

function inputFile(name: string, lines: string[]): string {
  const path = join(dir, name);
  writeFileSync(path, lines.join("\n") + "\n");
  return path;
}

async function run(input: string, out: string, overrides: Record<string, unknown> = {}) {
  const job = makeJob({
    modelId: "hash:4",
    inputPath: input,
    outputPath: join(dir, out),
    ...overrides,
  });
  const encoder = await createEncoder(job.modelId);
  const summary = await encodeFile(job, encoder);
  return { job, summary };
}

describe("encodeFile", () => {
  it("encodes a 3-line file with the declared count and dim", async () => {
    const input = inputFile("three.txt", ["alpha", "beta", "gamma"]);
    const { job, summary } = await run(input, "three.emb");
    expect(summary.count).toBe(3);
    expect(summary.dim).toBe(4);
    const buf = readFileSync(job.outputPath);
    expect(buf.readBigUInt64LE(12)).toBe(3n);
    expect(buf.readUInt32LE(8)).toBe(4);
  });

  it("is bitwise deterministic across runs", async () => {
    const input = inputFile("det.txt", ["one sentence", "another sentence"]);
    const a = await run(input, "det-a.emb");
    const b = await run(input, "det-b.emb");
    expect(readFileSync(a.job.outputPath).equals(readFileSync(b.job.outputPath))).toBe(true);
    expect(
      readFileSync(`${a.job.outputPath}.ids.jsonl`).equals(
        readFileSync(`${b.job.outputPath}.ids.jsonl`),
      ),
    ).toBe(true);
  });

  it("produces identical payloads for any batch size", async () => {
    const lines = Array.from({ length: 23 }, (_, i) => `sentence number ${i}`);
    const input = inputFile("batch.txt", lines);
    const small = await run(input, "batch-1.emb", { batchSize: 1 });
    const large = await run(input, "batch-64.emb", { batchSize: 64 });
    expect(
      readFileSync(small.job.outputPath).equals(readFileSync(large.job.outputPath)),
    ).toBe(true);
  });

  it("keeps row order equal to line order with 1-based line ids", async () => {
    const input = inputFile("order.txt", ["c", "a", "b"]);
    const { job } = await run(input, "order.emb");
    const ids = readFileSync(`${job.outputPath}.ids.jsonl`, "utf8")
      .trim()
      .split("\n")
      .map((l) => JSON.parse(l));
    expect(ids).toEqual([
      { row: 0, id: "1" },
      { row: 1, id: "2" },
      { row: 2, id: "3" },
    ]);
    // row 1 of the file equals a solo encode of its line
    const solo = await run(inputFile("solo.txt", ["a"]), "solo.emb");
    const full = readFileSync(job.outputPath);
    const one = readFileSync(solo.job.outputPath);
    expect(full.subarray(24 + 16, 24 + 32).equals(one.subarray(24, 24 + 16))).toBe(true);
  });

  it("normalizes to unit length by default and flags the header", async () => {
    const input = inputFile("norm.txt", ["x", "y"]);
    const { job } = await run(input, "norm.emb");
    const buf = readFileSync(job.outputPath);
    expect(buf.readUInt32LE(20)).toBe(1);
    for (let i = 0; i < 2; i++) {
      let sq = 0;
      for (let j = 0; j < 4; j++) {
        const v = buf.readFloatLE(24 + (i * 4 + j) * 4);
        sq += v * v;
      }
      expect(Math.abs(Math.sqrt(sq) - 1)).toBeLessThan(1e-6);
    }
  });

  it("writes raw vectors with the flag clear when normalize is off", async () => {
    const input = inputFile("raw.txt", ["x"]);
    const { job } = await run(input, "raw.emb", { normalize: false });
    const buf = readFileSync(job.outputPath);
    expect(buf.readUInt32LE(20)).toBe(0);
    let sq = 0;
    for (let j = 0; j < 4; j++) {
      const v = buf.readFloatLE(24 + j * 4);
      sq += v * v;
    }
    expect(Math.abs(Math.sqrt(sq) - 1)).toBeGreaterThan(1e-3);
  });

  it("rejects an empty input file", async () => {
    const path = join(dir, "empty.txt");
    writeFileSync(path, "");
    await expect(run(path, "empty.emb")).rejects.toThrow(/input is empty/);
  });

  it("rejects a non-positive batch size", () => {
    expect(() => makeJob({ modelId: "hash:4", inputPath: "x", outputPath: "y", batchSize: 0 })).toThrow(
      /batchSize/,
    );
  });

  it("does not count a trailing newline as a line", () => {
    const path = join(dir, "trail.txt");
    writeFileSync(path, "a\nb\n");
    expect(readLines(path)).toEqual(["a", "b"]);
    writeFileSync(path, "a\nb");
    expect(readLines(path)).toEqual(["a", "b"]);
  });
});

describe("error line numbers", () => {
  class PoisonEncoder implements Encoder {
    readonly modelId = "poison";
    readonly normalizes = false;

    constructor(private readonly inner: HashEncoder, private readonly poison: string, private readonly mode: "nan" | "dim") {}

    async encode(texts: string[]): Promise<Float32Array[]> {
      const rows = await this.inner.encode(texts);
      return rows.map((row, i) => {
        if (texts[i] !== this.poison) {
          return row;
        }
        if (this.mode === "nan") {
          const bad = row.slice();
          bad[0] = NaN;
          return bad;
        }
        return new Float32Array(row.length + 1);
      });
    }
  }

  async function poisonRun(mode: "nan" | "dim") {
    const input = inputFile(`poison-${mode}.txt`, ["fine", "bad apple", "fine too"]);
    const job = makeJob({ modelId: "poison", inputPath: input, outputPath: join(dir, "p.emb") });
    return encodeFile(job, new PoisonEncoder(new HashEncoder(4), "bad apple", mode));
  }

  it("names the offending line for non-finite output", async () => {
    const err = await poisonRun("nan").catch((e) => e);
    expect(err).toBeInstanceOf(EncodingError);
    expect(err.line).toBe(2);
    expect(err.message).toMatch(/line 2/);
  });

  it("names the offending line for a dim change mid-stream", async () => {
    const err = await poisonRun("dim").catch((e) => e);
    expect(err).toBeInstanceOf(EncodingError);
    expect(err.line).toBe(2);
  });
});

describe("encoder selection", () => {
  it("rejects malformed hash specs as load errors", async () => {
    await expect(createEncoder("hash:abc")).rejects.toThrow(ModelLoadError);
    await expect(createEncoder("hash:0")).rejects.toThrow(ModelLoadError);
  });
});

describe("checked-in fixture", () => {
  it("encodes the 2-line input to the exact expected bytes", async () => {
    const { job } = await run(join(FIXTURES, "input-2x4.txt"), "fixture.emb");
    const got = readFileSync(job.outputPath);
    const want = readFileSync(join(FIXTURES, "expected-2x4.emb"));
    expect(got.equals(want)).toBe(true);
    const gotIds = readFileSync(`${job.outputPath}.ids.jsonl`);
    const wantIds = readFileSync(join(FIXTURES, "expected-2x4.emb.ids.jsonl"));
    expect(gotIds.equals(wantIds)).toBe(true);
  });
});
