/**
 * Lowering a block to a trainable network.
 *
 * The block operates at a single channel width: a 1x1 stem convolution
 * lifts the dataset's channels to that width, then every layer consumes
 * the tensors named by its predecessor codes. Stride is 1 and padding
 * 'same' throughout, so spatial shape is preserved end to end.
 *
 *   dwconv k    ReLU -> depthwise conv (k x k) -> batch norm
 *   maxpool k   max pooling, k x k window
 *   avgpool k   average pooling, k x k window
 *   identity    pass-through
 *   add         element-wise sum; a 1x1 convolution projects the second
 *               operand when channel counts disagree
 *   concat      channel concatenation
 *
 * Layers that no later layer consumes are the block outputs; they are
 * concatenated, pooled globally and fed to a softmax classifier head.
 */

import * as tf from "@tensorflow/tfjs";
import { BlockSpec, LayerSpec, isBinary } from "./blocks.js";

export interface MaterializeOptions {
  inputShape: [number, number, number]; // height, width, channels
  classes: number;
  width: number; // working channel count inside the block
}

function applyOp(layer: LayerSpec, a: tf.SymbolicTensor, b: tf.SymbolicTensor | null): tf.SymbolicTensor {
  switch (layer.op) {
    case "dwconv": {
      const act = tf.layers.reLU().apply(a) as tf.SymbolicTensor;
      const conv = tf.layers
        .depthwiseConv2d({ kernelSize: layer.k, strides: 1, padding: "same", depthMultiplier: 1 })
        .apply(act) as tf.SymbolicTensor;
      // momentum tuned for runs of a few dozen steps: the default 0.99
      // leaves the moving statistics near their init at evaluation time
      return tf.layers.batchNormalization({ momentum: 0.9 }).apply(conv) as tf.SymbolicTensor;
    }
    case "maxpool":
      return tf.layers
        .maxPooling2d({ poolSize: layer.k, strides: 1, padding: "same" })
        .apply(a) as tf.SymbolicTensor;
    case "avgpool":
      return tf.layers
        .averagePooling2d({ poolSize: layer.k, strides: 1, padding: "same" })
        .apply(a) as tf.SymbolicTensor;
    case "identity":
      return a;
    case "add": {
      if (b === null) {
        throw new Error("add needs two inputs");
      }
      const ca = a.shape[a.shape.length - 1] as number;
      const cb = b.shape[b.shape.length - 1] as number;
      let rhs = b;
      if (ca !== cb) {
        // channel arithmetic inside blocks is underdetermined; a 1x1
        // projection keeps every sampled block buildable
        rhs = tf.layers
          .conv2d({ filters: ca, kernelSize: 1, strides: 1, padding: "same" })
          .apply(b) as tf.SymbolicTensor;
      }
      return tf.layers.add().apply([a, rhs]) as tf.SymbolicTensor;
    }
    case "concat":
      if (b === null) {
        throw new Error("concat needs two inputs");
      }
      return tf.layers.concatenate({ axis: -1 }).apply([a, b]) as tf.SymbolicTensor;
  }
}

function buildGraph(
  block: BlockSpec,
  options: MaterializeOptions,
): { input: tf.SymbolicTensor; body: tf.SymbolicTensor } {
  const input = tf.input({ shape: options.inputShape });
  const stem = tf.layers
    .conv2d({ filters: options.width, kernelSize: 1, strides: 1, padding: "same" })
    .apply(input) as tf.SymbolicTensor;

  // produced[c] is the tensor a predecessor code c names
  const produced: tf.SymbolicTensor[] = [stem];
  const consumed = new Set<number>();
  block.layers.forEach((layer, idx) => {
    const a = produced[layer.pred1 - 1];
    const b = isBinary(layer.op) ? produced[layer.pred2 - 1] : null;
    if (a === undefined || (isBinary(layer.op) && b === undefined)) {
      throw new Error(`layer ${idx + 1}: predecessor not yet produced`);
    }
    consumed.add(layer.pred1);
    if (isBinary(layer.op)) {
      consumed.add(layer.pred2);
    }
    produced.push(applyOp(layer, a, b ?? null));
  });

  const tails = block.layers
    .map((_, idx) => idx + 2) // code naming layer idx
    .filter((code) => !consumed.has(code))
    .map((code) => produced[code - 1]);
  const body =
    tails.length === 1
      ? tails[0]
      : (tf.layers.concatenate({ axis: -1 }).apply(tails) as tf.SymbolicTensor);
  return { input, body };
}

/** The block's feature extractor alone: input image to block output. */
export function materializeBody(block: BlockSpec, options: MaterializeOptions): tf.LayersModel {
  const { input, body } = buildGraph(block, options);
  return tf.model({ inputs: input, outputs: body });
}

/** Build the classifier network realizing a valid block. */
export function materialize(block: BlockSpec, options: MaterializeOptions): tf.LayersModel {
  const { input, body } = buildGraph(block, options);
  const pooled = tf.layers.globalAveragePooling2d({}).apply(body) as tf.SymbolicTensor;
  const logits = tf.layers
    .dense({ units: options.classes, activation: "softmax" })
    .apply(pooled) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: logits });
}
