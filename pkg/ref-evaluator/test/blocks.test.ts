import { describe, expect, it } from "vitest";
import { parseBlock, violations } from "../src/blocks.js";

const RESNET = {
  layers: [
    { op: "dwconv", k: 3, p: [1, 0] },
    { op: "dwconv", k: 3, p: [2, 0] },
    { op: "add", k: 0, p: [1, 3] },
  ],
};

describe("parseBlock", () => {
  it("accepts the residual reference block", () => {
    const block = parseBlock(RESNET);
    expect(block.layers).toHaveLength(3);
    expect(block.layers[2]).toEqual({ op: "add", k: 0, pred1: 1, pred2: 3 });
  });

  it("rejects unknown ops by name", () => {
    expect(() =>
      parseBlock({ layers: [{ op: "warp", k: 3, p: [1, 0] }] }),
    ).toThrow(/unknown op "warp"/);
  });

  it("rejects kernels illegal for the category", () => {
    expect(() =>
      parseBlock({ layers: [{ op: "dwconv", k: 2, p: [1, 0] }] }),
    ).toThrow(/kernel 2 is not legal/);
    expect(() =>
      parseBlock({ layers: [{ op: "identity", k: 3, p: [1, 0] }] }),
    ).toThrow(/kernel 3 is not legal/);
  });

  it("rejects binary ops with identical predecessors", () => {
    expect(() =>
      parseBlock({ layers: [{ op: "add", k: 0, p: [1, 1] }] }),
    ).toThrow(/identical predecessors/);
  });

  it("rejects forward references", () => {
    expect(() =>
      parseBlock({ layers: [{ op: "dwconv", k: 3, p: [2, 0] }] }),
    ).toThrow(/out of range/);
  });

  it("rejects absent pred1 and unary pred2", () => {
    expect(() =>
      parseBlock({ layers: [{ op: "dwconv", k: 3, p: [0, 0] }] }),
    ).toThrow(/pred1 must not be 0/);
    expect(() =>
      parseBlock({ layers: [{ op: "identity", k: 0, p: [1, 1] }] }),
    ).toThrow(/must have pred2 = 0/);
  });

  it("rejects structurally malformed payloads", () => {
    expect(() => parseBlock(null)).toThrow(/must be an object/);
    expect(() => parseBlock({ layers: "nope" })).toThrow(/'layers' list/);
    expect(() => parseBlock({ layers: [{ op: "dwconv", k: 3, p: [1] }] })).toThrow(
      /pred1, pred2/,
    );
    expect(() =>
      parseBlock({ layers: [{ op: "dwconv", k: 3.5, p: [1, 0] }] }),
    ).toThrow(/must be an integer/);
  });

  it("reports empty blocks", () => {
    expect(violations({ layers: [] })).toContain("block must contain at least one layer");
  });
});
