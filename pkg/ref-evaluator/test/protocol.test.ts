/**
 * Wire-protocol conformance, including the 50-request mixed batch: every
 * request gets exactly one response line with the matching id, failures
 * stay per-architecture, and closing stdin ends the process with code 0.
 *
 * Run `npm run build` first; these tests drive dist/serve.js.
 */

import { describe, expect, it } from "vitest";
import { Worker } from "./worker.js";

const IDENTITY_BLOCK = { layers: [{ op: "identity", k: 0, p: [1, 0] }] };
const POOL_BLOCK = {
  layers: [
    { op: "maxpool", k: 3, p: [1, 0] },
    { op: "avgpool", k: 3, p: [1, 0] },
  ],
};

const BAD_ARCHS: unknown[] = [
  { layers: [{ op: "warp", k: 3, p: [1, 0] }] }, // unknown op
  { layers: [{ op: "add", k: 0, p: [1, 1] }] }, // identical predecessors
  { layers: [{ op: "dwconv", k: 2, p: [1, 0] }] }, // illegal kernel
  { layers: [{ op: "dwconv", k: 3, p: [5, 0] }] }, // forward reference
  { layers: [] }, // empty block
  { nope: true }, // no layers list
];

describe("serve", () => {
  it("answers a valid 1-layer request with a matching id", async () => {
    const worker = new Worker(["--epochs", "1"]);
    worker.send({ id: 41, arch: IDENTITY_BLOCK });
    const response = JSON.parse(await worker.nextLine());
    expect(response.id).toBe(41);
    expect(response.accuracy).toBeGreaterThanOrEqual(0);
    expect(response.accuracy).toBeLessThanOrEqual(100);
    expect(await worker.close()).toBe(0);
  });

  it("reports unknown ops as errors and keeps serving", async () => {
    const worker = new Worker(["--epochs", "1"]);
    worker.send({ id: 1, arch: BAD_ARCHS[0] });
    const first = JSON.parse(await worker.nextLine());
    expect(first).toEqual({ id: 1, error: expect.stringMatching(/unknown op/) });
    worker.send({ id: 2, arch: IDENTITY_BLOCK });
    const second = JSON.parse(await worker.nextLine());
    expect(second.id).toBe(2);
    expect(second.accuracy).toBeGreaterThanOrEqual(0);
    expect(await worker.close()).toBe(0);
  });

  it("exits 0 as soon as input closes", async () => {
    const worker = new Worker([]);
    expect(await worker.close()).toBe(0);
  });

  it("rejects a bad configuration with exit code 2", async () => {
    const worker = new Worker(["--epochs", "0"]);
    expect(await worker.close()).toBe(2);
  });

  it("answers 50 mixed valid and invalid requests, ids paired, one line each", async () => {
    const worker = new Worker(["--epochs", "1"]);
    const expectValid: boolean[] = [];
    for (let i = 0; i < 50; i++) {
      const id = 1000 + i;
      if (i % 2 === 0) {
        worker.send({ id, arch: i % 4 === 0 ? IDENTITY_BLOCK : POOL_BLOCK });
        expectValid.push(true);
      } else {
        worker.send({ id, arch: BAD_ARCHS[i % BAD_ARCHS.length] });
        expectValid.push(false);
      }
    }
    const responses = [];
    for (let i = 0; i < 50; i++) {
      responses.push(JSON.parse(await worker.nextLine()));
    }
    responses.forEach((response, i) => {
      expect(response.id).toBe(1000 + i);
      if (expectValid[i]) {
        expect(response.accuracy).toBeGreaterThanOrEqual(0);
        expect(response.accuracy).toBeLessThanOrEqual(100);
        expect(response.error).toBeUndefined();
      } else {
        expect(typeof response.error).toBe("string");
        expect(response.accuracy).toBeUndefined();
      }
    });
    expect(await worker.close()).toBe(0);
  });
});
