/**
 * Short training runs behind the protocol.
 *
 * Each architecture gets a freshly materialized network trained with
 * Adam for a fixed number of epochs; the reported score is validation
 * accuracy in percent, clamped to [0, 100]. Everything allocated for
 * the run is disposed afterwards so a long-lived worker stays flat in
 * memory.
 */

import * as tf from "@tensorflow/tfjs";
import { BlockSpec } from "./blocks.js";
import { Dataset } from "./dataset.js";
import { materialize } from "./materialize.js";

export interface PluginConfig {
  dataset: string; // path to a JSON dataset, or "toy" for the builtin set
  epochs: number; // >= 1
  batchSize: number;
  width: number; // channel width inside the block
  device: "cpu"; // the pure-JS backend is CPU-only
}

export const DEFAULT_CONFIG: PluginConfig = {
  dataset: "toy",
  epochs: 2,
  batchSize: 8,
  width: 8,
  device: "cpu",
};

export function validateConfig(config: PluginConfig): void {
  if (!Number.isInteger(config.epochs) || config.epochs < 1) {
    throw new Error(`epochs must be a positive integer, got ${config.epochs}`);
  }
  if (!Number.isInteger(config.batchSize) || config.batchSize < 1) {
    throw new Error(`batch size must be a positive integer, got ${config.batchSize}`);
  }
  if (!Number.isInteger(config.width) || config.width < 1) {
    throw new Error(`width must be a positive integer, got ${config.width}`);
  }
  if (config.device !== "cpu") {
    throw new Error(`unsupported device ${JSON.stringify(config.device)} (only cpu)`);
  }
}

/** Train one block briefly and return validation accuracy in [0, 100]. */
export async function trainAndScore(
  block: BlockSpec,
  data: Dataset,
  config: PluginConfig,
): Promise<number> {
  const shape = data.trainX.shape;
  const model = materialize(block, {
    inputShape: [shape[1], shape[2], shape[3]],
    classes: data.classes,
    width: config.width,
  });
  try {
    model.compile({
      optimizer: tf.train.adam(0.03),
      loss: "categoricalCrossentropy",
      metrics: ["accuracy"],
    });
    await model.fit(data.trainX, data.trainY, {
      epochs: config.epochs,
      batchSize: config.batchSize,
      shuffle: true,
      verbose: 0,
    });
    const evaluated = model.evaluate(data.valX, data.valY, {
      batchSize: config.batchSize,
    }) as tf.Scalar[];
    const accuracy = (await evaluated[1].data())[0] * 100;
    evaluated.forEach((t) => t.dispose());
    return Math.min(100, Math.max(0, accuracy));
  } finally {
    model.dispose();
  }
}
