import { createHash } from "node:crypto";

export class ModelLoadError extends Error {}

export class EncodingError extends Error {
  readonly line: number;

  constructor(line: number, message: string) {
    super(`line ${line}: ${message}`);
    this.line = line;
  }
}

export interface Encoder {
  readonly modelId: string;
  /** True when the backend already emits unit-length vectors. */
  readonly normalizes: boolean;
  encode(texts: string[]): Promise<Float32Array[]>;
}

/**
 * Deterministic stand-in backend, selected with ids like "hash:4".
 *
 * Each line maps to a fixed pseudo-random direction derived from its
 * sha256, so format and pipeline behavior can be exercised without
 * model weights. Never use the output as a real embedding.
 */
export class HashEncoder implements Encoder {
  readonly modelId: string;
  readonly normalizes = false;
  readonly dim: number;

  constructor(dim: number) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new ModelLoadError(`hash encoder dim must be a positive integer, got ${dim}`);
    }
    this.dim = dim;
    this.modelId = `hash:${dim}`;
  }

  async encode(texts: string[]): Promise<Float32Array[]> {
    return texts.map((text) => {
      const out = new Float32Array(this.dim);
      let block = Buffer.alloc(0);
      for (let j = 0; j < this.dim; j++) {
        if (j % 8 === 0) {
          // each sha256 block yields 8 u32 words
          block = createHash("sha256")
            .update(text, "utf8")
            .update(`:${j / 8}`)
            .digest();
        }
        const word = block.readUInt32LE((j % 8) * 4);
        out[j] = (word / 0xffffffff) * 2 - 1;
      }
      return out;
    });
  }
}

class TransformersEncoder implements Encoder {
  readonly modelId: string;
  readonly normalizes = true;

  constructor(modelId: string, private readonly pipe: any) {
    this.modelId = modelId;
  }

  async encode(texts: string[]): Promise<Float32Array[]> {
    const out = await this.pipe(texts, { pooling: "mean", normalize: true });
    const [batch, dim] = out.dims;
    const flat = out.data as Float32Array;
    const rows: Float32Array[] = [];
    for (let i = 0; i < batch; i++) {
      rows.push(flat.slice(i * dim, (i + 1) * dim));
    }
    return rows;
  }
}

export async function createEncoder(modelId: string): Promise<Encoder> {
  const hashSpec = modelId.match(/^hash:(\d+)$/);
  if (hashSpec) {
    return new HashEncoder(Number(hashSpec[1]));
  }
  if (modelId.startsWith("hash:")) {
    throw new ModelLoadError(`invalid hash encoder spec '${modelId}', expected hash:<dim>`);
  }
  let pipe;
  try {
    const { pipeline } = await import("@xenova/transformers");
    pipe = await pipeline("feature-extraction", modelId);
  } catch (err) {
    throw new ModelLoadError(`cannot load model '${modelId}': ${(err as Error).message}`);
  }
  return new TransformersEncoder(modelId, pipe);
}
