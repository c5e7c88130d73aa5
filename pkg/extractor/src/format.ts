/**
 * The EMB1 embedding-store format (little-endian):
 *
 *   magic "EMB1" | version u32 = 1 | count u64 | dim u32 | count*dim float32
 *
 * with a JSON sidecar next to the store (same basename, extension
 * `.idx.json`) mapping sentence id -> row index. Float payloads must
 * roundtrip bit-exactly.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export const MAGIC = "EMB1";
export const VERSION = 1;
const HEADER_BYTES = 4 + 4 + 8 + 4;

export interface EmbeddingStore {
  dim: number;
  /** row index of each sentence id */
  ids: string[];
  /** row-major (ids.length x dim) */
  vectors: Float32Array;
}

export class StoreFormatError extends Error {}

export function sidecarPath(storePath: string): string {
  const dir = path.dirname(storePath);
  const base = path.basename(storePath);
  const dot = base.lastIndexOf(".");
  const stem = dot > 0 ? base.slice(0, dot) : base;
  return path.join(dir, `${stem}.idx.json`);
}

export function encodeStore(store: EmbeddingStore): Buffer {
  const count = store.ids.length;
  if (store.vectors.length !== count * store.dim) {
    throw new StoreFormatError(
      `vector payload ${store.vectors.length} != count*dim = ${count * store.dim}`,
    );
  }
  const buf = Buffer.alloc(HEADER_BYTES + count * store.dim * 4);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeBigUInt64LE(BigInt(count), 8);
  buf.writeUInt32LE(store.dim, 16);
  for (let i = 0; i < store.vectors.length; i++) {
    buf.writeFloatLE(store.vectors[i], HEADER_BYTES + i * 4);
  }
  return buf;
}

export function decodeStore(buf: Buffer, ids: string[]): EmbeddingStore {
  if (buf.length < HEADER_BYTES || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new StoreFormatError("bad magic, not an embedding store");
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new StoreFormatError(`unsupported store version ${version}`);
  }
  const count = Number(buf.readBigUInt64LE(8));
  const dim = buf.readUInt32LE(16);
  const expected = count * dim * 4;
  if (buf.length - HEADER_BYTES !== expected) {
    throw new StoreFormatError(
      `payload length ${buf.length - HEADER_BYTES} != count*dim*4 = ${expected}`,
    );
  }
  if (ids.length !== count) {
    throw new StoreFormatError(`index has ${ids.length} ids, store has ${count} rows`);
  }
  const vectors = new Float32Array(count * dim);
  for (let i = 0; i < vectors.length; i++) {
    vectors[i] = buf.readFloatLE(HEADER_BYTES + i * 4);
  }
  return { dim, ids, vectors };
}

export function writeStore(storePath: string, store: EmbeddingStore): void {
  fs.writeFileSync(storePath, encodeStore(store));
  const index: Record<string, number> = {};
  store.ids.forEach((id, row) => {
    index[id] = row;
  });
  fs.writeFileSync(sidecarPath(storePath), JSON.stringify(index, null, 0), "utf-8");
}

export function readStore(storePath: string): EmbeddingStore {
  const idxPath = sidecarPath(storePath);
  if (!fs.existsSync(idxPath)) {
    throw new StoreFormatError(`missing index sidecar ${idxPath}`);
  }
  const index = JSON.parse(fs.readFileSync(idxPath, "utf-8")) as Record<string, number>;
  const ids = Object.keys(index).sort((a, b) => index[a] - index[b]);
  return decodeStore(fs.readFileSync(storePath), ids);
}

export function getRow(store: EmbeddingStore, row: number): Float32Array {
  return store.vectors.subarray(row * store.dim, (row + 1) * store.dim);
}
