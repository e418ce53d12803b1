/**
 * Line-protocol evaluation worker.
 *
 * Reads one JSON request per stdin line, answers one JSON response per
 * line on stdout (flushed per line), and exits 0 when stdin closes:
 *
 *   -> {"id": 7, "arch": {"layers": [...]}}
 *   <- {"id": 7, "accuracy": 63.1}
 *   <- {"id": 7, "error": "why this architecture failed"}
 *
 * Architecture-level failures (unknown op, invalid wiring, unbuildable
 * network) are error responses; the process keeps serving. Requests are
 * handled serially in arrival order. Diagnostics go to stderr only.
 */

import { createInterface } from "node:readline";
import { parseArgs } from "node:util";
import { parseBlock } from "./blocks.js";
import { Dataset, loadDataset } from "./dataset.js";
import { DEFAULT_CONFIG, PluginConfig, trainAndScore, validateConfig } from "./train.js";

function configFromArgv(argv: string[]): PluginConfig {
  const { values } = parseArgs({
    args: argv,
    options: {
      epochs: { type: "string" },
      dataset: { type: "string" },
      batch: { type: "string" },
      width: { type: "string" },
      device: { type: "string" },
    },
  });
  const config: PluginConfig = {
    ...DEFAULT_CONFIG,
    ...(values.epochs !== undefined && { epochs: Number(values.epochs) }),
    ...(values.dataset !== undefined && { dataset: values.dataset }),
    ...(values.batch !== undefined && { batchSize: Number(values.batch) }),
    ...(values.width !== undefined && { width: Number(values.width) }),
    ...(values.device !== undefined && { device: values.device as PluginConfig["device"] }),
  };
  validateConfig(config);
  return config;
}

function reply(obj: Record<string, unknown>): void {
  // process.stdout.write is line-buffered to a pipe only after 'drain';
  // a newline-terminated single write keeps one response per line
  process.stdout.write(JSON.stringify(obj) + "\n");
}

async function handleLine(line: string, data: Dataset, config: PluginConfig): Promise<void> {
  if (line.trim() === "") {
    return;
  }
  let id: unknown = null;
  try {
    const request = JSON.parse(line);
    if (typeof request !== "object" || request === null || Array.isArray(request)) {
      throw new Error("request must be a JSON object");
    }
    id = (request as Record<string, unknown>).id ?? null;
    const block = parseBlock((request as Record<string, unknown>).arch);
    const accuracy = await trainAndScore(block, data, config);
    reply({ id, accuracy });
  } catch (err) {
    reply({ id, error: err instanceof Error ? err.message : String(err) });
  }
}

async function main(): Promise<void> {
  let config: PluginConfig;
  try {
    config = configFromArgv(process.argv.slice(2));
  } catch (err) {
    console.error(`ref-evaluator: ${err instanceof Error ? err.message : err}`);
    process.exit(2);
  }
  const data = await loadDataset(config.dataset);
  const lines = createInterface({ input: process.stdin, crlfDelay: Infinity });
  for await (const line of lines) {
    await handleLine(line, data, config);
  }
  process.exit(0);
}

main().catch((err) => {
  console.error(`ref-evaluator: fatal: ${err instanceof Error ? err.stack : err}`);
  process.exit(1);
});
