/**
 * Block architecture wire format.
 *
 * A block is a DAG of layers. Each layer carries an op category, a kernel
 * size (0 when kernel-free) and two predecessor codes:
 *
 *   0      absent (only legal as pred2 of a unary op)
 *   1      the block input
 *   i + 1  the layer at position i (1-based)
 *
 * Requests arrive as {"id": N, "arch": {"layers": [{"op", "k", "p"}, ...]}}.
 * Parsing is strict: anything that violates the encoding is reported as a
 * descriptive error so the search side can skip the candidate.
 */

export type OpCategory =
  | "dwconv"
  | "maxpool"
  | "avgpool"
  | "identity"
  | "add"
  | "concat";

const LEGAL_KERNELS: Record<OpCategory, number[]> = {
  dwconv: [1, 3, 5],
  maxpool: [3, 5],
  avgpool: [3, 5],
  identity: [0],
  add: [0],
  concat: [0],
};

const BINARY: ReadonlySet<OpCategory> = new Set(["add", "concat"]);

export interface LayerSpec {
  op: OpCategory;
  k: number;
  pred1: number;
  pred2: number;
}

export interface BlockSpec {
  layers: LayerSpec[];
}

export function isBinary(op: OpCategory): boolean {
  return BINARY.has(op);
}

function asRecord(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new Error(`${what} must be an object`);
  }
  return value as Record<string, unknown>;
}

function asInt(value: unknown, what: string): number {
  if (typeof value !== "number" || !Number.isInteger(value)) {
    throw new Error(`${what} must be an integer, got ${JSON.stringify(value)}`);
  }
  return value;
}

function parseLayer(value: unknown, position: number): LayerSpec {
  const obj = asRecord(value, `layer ${position}`);
  const op = obj.op;
  if (typeof op !== "string" || !(op in LEGAL_KERNELS)) {
    throw new Error(`layer ${position}: unknown op ${JSON.stringify(op)}`);
  }
  const category = op as OpCategory;
  const k = asInt(obj.k ?? 0, `layer ${position}: k`);
  if (!LEGAL_KERNELS[category].includes(k)) {
    throw new Error(`layer ${position}: kernel ${k} is not legal for ${category}`);
  }
  const p = obj.p;
  if (!Array.isArray(p) || p.length !== 2) {
    throw new Error(`layer ${position}: p must be a [pred1, pred2] pair`);
  }
  const pred1 = asInt(p[0], `layer ${position}: pred1`);
  const pred2 = asInt(p[1], `layer ${position}: pred2`);
  return { op: category, k, pred1, pred2 };
}

/** All invariant violations of a parsed block; empty means valid. */
export function violations(block: BlockSpec): string[] {
  const out: string[] = [];
  if (block.layers.length < 1) {
    out.push("block must contain at least one layer");
  }
  block.layers.forEach((layer, idx) => {
    const t = idx + 1;
    if (layer.pred1 === 0) {
      out.push(`layer ${t}: pred1 must not be 0`);
    }
    if (isBinary(layer.op)) {
      if (layer.pred2 === 0) {
        out.push(`layer ${t}: binary op ${layer.op} needs two predecessors`);
      } else if (layer.pred1 === layer.pred2) {
        out.push(`layer ${t}: binary op with identical predecessors`);
      }
    } else if (layer.pred2 !== 0) {
      out.push(`layer ${t}: unary op ${layer.op} must have pred2 = 0`);
    }
    for (const [slot, pred] of [["pred1", layer.pred1], ["pred2", layer.pred2]] as const) {
      if (pred < 0 || pred > t) {
        out.push(`layer ${t}: ${slot} code ${pred} out of range (0..${t})`);
      }
    }
  });
  return out;
}

/** Parse and validate the "arch" payload of a request. */
export function parseBlock(value: unknown): BlockSpec {
  const obj = asRecord(value, "arch");
  if (!Array.isArray(obj.layers)) {
    throw new Error("arch must carry a 'layers' list");
  }
  const layers = obj.layers.map((l, i) => parseLayer(l, i + 1));
  const block = { layers };
  const problems = violations(block);
  if (problems.length > 0) {
    throw new Error(`invalid architecture: ${problems.join("; ")}`);
  }
  return block;
}
