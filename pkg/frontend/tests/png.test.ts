import { strict as assert } from "assert";
import { test } from "node:test";
import { decodePng, encodePng } from "../src/png";

test("round trips arbitrary RGBA pixels", () => {
  const w = 13;
  const h = 7;
  const rgba = new Uint8Array(w * h * 4);
  for (let i = 0; i < rgba.length; i++) {
    rgba[i] = (i * 37 + 11) % 256;
  }
  const buf = encodePng(w, h, rgba);
  const back = decodePng(buf);
  assert.equal(back.width, w);
  assert.equal(back.height, h);
  assert.deepEqual([...back.rgba], [...rgba]);
});

test("starts with the PNG signature and IHDR", () => {
  const buf = encodePng(2, 2, new Uint8Array(16));
  assert.deepEqual([...buf.subarray(0, 8)],
                   [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
  assert.equal(buf.subarray(12, 16).toString("ascii"), "IHDR");
  assert.equal(buf.readUInt32BE(16), 2);
  assert.equal(buf.readUInt32BE(20), 2);
});

test("identical pixels give identical bytes", () => {
  const rgba = new Uint8Array(4 * 3 * 4).fill(129);
  const a = encodePng(4, 3, rgba);
  const b = encodePng(4, 3, Uint8Array.from(rgba));
  assert.deepEqual([...a], [...b]);
});

test("rejects a wrong-sized buffer", () => {
  assert.throws(() => encodePng(4, 4, new Uint8Array(10)), /expected/);
});
