/**
 * Training data for the plugin.
 *
 * The builtin toy set is a deterministic synthetic image task: three
 * texture classes (horizontal stripes, vertical stripes, checkerboard)
 * at 16x16x1 with additive noise, split into train and validation
 * halves. Every tenth example keeps its texture but takes the next
 * class's label, so a perfect texture classifier tops out at 90%:
 * learnable within a couple of epochs, never trivially 100%.
 *
 * Alternatively a JSON file can be supplied:
 *   {"width": W, "height": H, "channels": C, "classes": K,
 *    "images": [[...H*W*C floats...], ...], "labels": [0..K-1, ...]}
 */

import * as tf from "@tensorflow/tfjs";

export interface Dataset {
  trainX: tf.Tensor4D;
  trainY: tf.Tensor2D;
  valX: tf.Tensor4D;
  valY: tf.Tensor2D;
  classes: number;
}

// splitmix-style deterministic generator; quality is irrelevant here,
// stability across runs and platforms is what matters
function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x9e3779b9) >>> 0;
    let z = state;
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
    z = z ^ (z >>> 15);
    return (z >>> 0) / 4294967296;
  };
}

const TOY_SIDE = 16;
const TOY_CLASSES = 3;
const TOY_PER_CLASS = 100; // per class, before the train/val split

function toyImage(cls: number, rng: () => number, phase: number): Float32Array {
  const px = new Float32Array(TOY_SIDE * TOY_SIDE);
  for (let y = 0; y < TOY_SIDE; y++) {
    for (let x = 0; x < TOY_SIDE; x++) {
      let v: number;
      if (cls === 0) {
        v = (y + phase) % 4 < 2 ? 1 : 0; // horizontal stripes
      } else if (cls === 1) {
        v = (x + phase) % 4 < 2 ? 1 : 0; // vertical stripes
      } else {
        v = (x + y + phase) % 2; // pixel checkerboard
      }
      px[y * TOY_SIDE + x] = v + 0.15 * (rng() - 0.5);
    }
  }
  return px;
}

export function builtinToySet(): Dataset {
  const rng = makeRng(12345);
  const images: Float32Array[] = [];
  const labels: number[] = [];
  for (let cls = 0; cls < TOY_CLASSES; cls++) {
    for (let i = 0; i < TOY_PER_CLASS; i++) {
      images.push(toyImage(cls, rng, i % 4));
      // fixed 10% label corruption caps achievable accuracy below 100
      labels.push(i % 10 === 9 ? (cls + 1) % TOY_CLASSES : cls);
    }
  }
  // deterministic interleave so both splits see every class
  const order = images.map((_, i) => i);
  for (let i = order.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  const valEvery = 5; // 20% validation
  const trainIdx = order.filter((_, i) => i % valEvery !== 0);
  const valIdx = order.filter((_, i) => i % valEvery === 0);
  return tensorize(
    trainIdx.map((i) => images[i]),
    trainIdx.map((i) => labels[i]),
    valIdx.map((i) => images[i]),
    valIdx.map((i) => labels[i]),
    TOY_SIDE,
    TOY_SIDE,
    1,
    TOY_CLASSES,
  );
}

function tensorize(
  trainImages: Float32Array[] | number[][],
  trainLabels: number[],
  valImages: Float32Array[] | number[][],
  valLabels: number[],
  height: number,
  width: number,
  channels: number,
  classes: number,
): Dataset {
  const flat = (rows: Float32Array[] | number[][]) => {
    const out = new Float32Array(rows.length * height * width * channels);
    rows.forEach((row, i) => out.set(row, i * height * width * channels));
    return out;
  };
  return {
    trainX: tf.tensor4d(flat(trainImages), [trainImages.length, height, width, channels]),
    trainY: tf.oneHot(tf.tensor1d(trainLabels, "int32"), classes) as tf.Tensor2D,
    valX: tf.tensor4d(flat(valImages), [valImages.length, height, width, channels]),
    valY: tf.oneHot(tf.tensor1d(valLabels, "int32"), classes) as tf.Tensor2D,
    classes,
  };
}

export async function loadDataset(spec: string): Promise<Dataset> {
  if (spec === "toy") {
    return builtinToySet();
  }
  const { readFile } = await import("node:fs/promises");
  const raw = JSON.parse(await readFile(spec, "utf8"));
  const { width, height, channels, classes } = raw;
  const images: number[][] = raw.images;
  const labels: number[] = raw.labels;
  if (!Array.isArray(images) || !Array.isArray(labels) || images.length !== labels.length) {
    throw new Error(`dataset file ${spec}: images/labels missing or of unequal length`);
  }
  const valEvery = 5;
  const trainImages = images.filter((_, i) => i % valEvery !== 0);
  const trainLabels = labels.filter((_, i) => i % valEvery !== 0);
  const valImages = images.filter((_, i) => i % valEvery === 0);
  const valLabels = labels.filter((_, i) => i % valEvery === 0);
  return tensorize(trainImages, trainLabels, valImages, valLabels, height, width, channels, classes);
}
