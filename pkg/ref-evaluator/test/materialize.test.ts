import * as tf from "@tensorflow/tfjs";
import { describe, expect, it } from "vitest";
import { parseBlock } from "../src/blocks.js";
import { builtinToySet } from "../src/dataset.js";
import { materialize, materializeBody } from "../src/materialize.js";
import { DEFAULT_CONFIG, trainAndScore, validateConfig } from "../src/train.js";

const RESNET = parseBlock({
  layers: [
    { op: "dwconv", k: 3, p: [1, 0] },
    { op: "dwconv", k: 3, p: [2, 0] },
    { op: "add", k: 0, p: [1, 3] },
  ],
});

const PLAIN_CHAIN = parseBlock({
  layers: [
    { op: "dwconv", k: 3, p: [1, 0] },
    { op: "dwconv", k: 3, p: [2, 0] },
  ],
});

describe("materialize", () => {
  it("runs the residual block forward on a 32x32 input", () => {
    const model = materialize(RESNET, { inputShape: [32, 32, 3], classes: 10, width: 8 });
    const out = model.predict(tf.zeros([1, 32, 32, 3])) as tf.Tensor;
    expect(out.shape).toEqual([1, 10]);
    const probs = out.dataSync();
    expect(Math.abs([...probs].reduce((a, b) => a + b, 0) - 1)).toBeLessThan(1e-5);
    out.dispose();
    model.dispose();
  });

  it("preserves spatial shape through the stride-1 chain", () => {
    const body = materializeBody(PLAIN_CHAIN, { inputShape: [32, 32, 3], classes: 10, width: 8 });
    const out = body.predict(tf.zeros([2, 32, 32, 3])) as tf.Tensor;
    expect(out.shape.slice(0, 3)).toEqual([2, 32, 32]);
    out.dispose();
    body.dispose();
  });

  it("keeps every op of the vocabulary buildable", () => {
    const block = parseBlock({
      layers: [
        { op: "dwconv", k: 1, p: [1, 0] },
        { op: "maxpool", k: 5, p: [2, 0] },
        { op: "avgpool", k: 3, p: [1, 0] },
        { op: "identity", k: 0, p: [4, 0] },
        { op: "concat", k: 0, p: [3, 5] },
        { op: "add", k: 0, p: [1, 6] }, // width vs 2x width: projection path
      ],
    });
    const model = materialize(block, { inputShape: [16, 16, 1], classes: 3, width: 4 });
    const out = model.predict(tf.zeros([1, 16, 16, 1])) as tf.Tensor;
    expect(out.shape).toEqual([1, 3]);
    out.dispose();
    model.dispose();
  });

  it("scores the residual block inside the open (10, 100) band after two epochs", async () => {
    // recorded reference run on the builtin toy set: 88.33
    const data = builtinToySet();
    const accuracy = await trainAndScore(RESNET, data, DEFAULT_CONFIG);
    expect(accuracy).toBeGreaterThan(10);
    expect(accuracy).toBeLessThan(100);
    tf.dispose([data.trainX, data.trainY, data.valX, data.valY]);
  });
});

describe("config", () => {
  it("requires at least one epoch and a known device", () => {
    expect(() => validateConfig({ ...DEFAULT_CONFIG, epochs: 0 })).toThrow(/epochs/);
    expect(() => validateConfig({ ...DEFAULT_CONFIG, epochs: 1.5 })).toThrow(/epochs/);
    expect(() =>
      validateConfig({ ...DEFAULT_CONFIG, device: "tpu" as never }),
    ).toThrow(/unsupported device/);
    expect(() => validateConfig(DEFAULT_CONFIG)).not.toThrow();
  });
});
