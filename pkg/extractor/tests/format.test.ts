import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import {
  decodeStore,
  encodeStore,
  getRow,
  readStore,
  sidecarPath,
  StoreFormatError,
  writeStore,
} from "../src/format.js";

const FIXTURES = path.join(path.dirname(fileURLToPath(import.meta.url)), "fixtures");

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "emb1-"));
}

describe("EMB1 encoding", () => {
  it("roundtrips bit-exactly", () => {
    const vectors = new Float32Array([1.5, -2.25, 1e-7, 42.0, 0.0, -0.0]);
    const store = { dim: 3, ids: ["a", "b"], vectors };
    const back = decodeStore(encodeStore(store), ["a", "b"]);
    expect(back.dim).toBe(3);
    expect(Buffer.from(back.vectors.buffer)).toEqual(Buffer.from(vectors.buffer));
  });

  it("reads the store written by the training side byte-for-byte", () => {
    // fixture produced by the Python package's write_store
    const store = readStore(path.join(FIXTURES, "pinned.emb"));
    expect(store.dim).toBe(4);
    expect(store.ids).toEqual(["a:ctx:0", "a:ans:0"]);
    expect(Array.from(getRow(store, 0))).toEqual([1.0, 2.5, -3.25, 0.0]);
    const row1 = getRow(store, 1);
    expect(row1[0]).toBe(-0.5);
    expect(row1[1]).toBeCloseTo(1e-7, 12);
    expect(row1[2]).toBe(42.0);
    expect(row1[3]).toBe(7.125);
    // and re-encoding reproduces the original bytes exactly
    const original = fs.readFileSync(path.join(FIXTURES, "pinned.emb"));
    expect(encodeStore(store)).toEqual(original);
  });

  it("rejects truncated payloads", () => {
    const store = { dim: 4, ids: ["x"], vectors: new Float32Array(4) };
    const buf = encodeStore(store).subarray(0, 20 + 8);
    expect(() => decodeStore(Buffer.from(buf), ["x"])).toThrow(StoreFormatError);
    expect(() => decodeStore(Buffer.from(buf), ["x"])).toThrow(/payload length/);
  });

  it("rejects bad magic and versions", () => {
    expect(() => decodeStore(Buffer.from("NOPE0000000000000000"), [])).toThrow(/magic/);
    const good = encodeStore({ dim: 1, ids: [], vectors: new Float32Array(0) });
    good.writeUInt32LE(9, 4);
    expect(() => decodeStore(good, [])).toThrow(/version/);
  });

  it("writes the sidecar next to the store", () => {
    const dir = tmpdir();
    const storePath = path.join(dir, "embeddings.emb");
    writeStore(storePath, { dim: 2, ids: ["s1", "s2"], vectors: new Float32Array(4) });
    expect(sidecarPath(storePath)).toBe(path.join(dir, "embeddings.idx.json"));
    const index = JSON.parse(fs.readFileSync(path.join(dir, "embeddings.idx.json"), "utf-8"));
    expect(index).toEqual({ s1: 0, s2: 1 });
  });

  it("is deterministic across rewrites", () => {
    const dir = tmpdir();
    const store = {
      dim: 3,
      ids: ["a", "b"],
      vectors: new Float32Array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
    };
    writeStore(path.join(dir, "x.emb"), store);
    const first = fs.readFileSync(path.join(dir, "x.emb"));
    writeStore(path.join(dir, "x.emb"), store);
    expect(fs.readFileSync(path.join(dir, "x.emb"))).toEqual(first);
  });
});
