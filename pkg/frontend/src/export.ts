/**
 * Converts a trained tfjs model into the portable JSON weight-file format and
 * records golden (input, logits) pairs computed by this exporter's own
 * forward pass, for cross-language round-trip tests.
 *
 * Weight-file conventions (format_version 1):
 * - dense: W of shape (out, in), so tfjs kernels (in, out) are transposed;
 * - recurrent-cell: W_x (hidden, frame), W_h (hidden, hidden), b (hidden);
 * - lstm-cell: per-gate W_g (hidden, frame), U_g (hidden, hidden), b_g; the
 *   tfjs kernel packs the gates along columns in the order i, f, c, o.
 */

import * as tf from "@tensorflow/tfjs";
import * as fs from "node:fs";
import * as path from "node:path";
import { makeDataset, train, TrainOptions, TrainResult } from "./train.js";
import { FRAME_SIZE, rng } from "./data.js";

export interface ExportBundle {
  weightFile: string;
  goldenFile: string;
  accuracy: number;
}

type Matrix = number[][];

function transpose(m: Matrix): Matrix {
  return m[0].map((_, j) => m.map((row) => row[j]));
}

/** Columns [offset, offset+width) of a (rows, cols) matrix. */
function slice(m: Matrix, offset: number, width: number): Matrix {
  return m.map((row) => row.slice(offset, offset + width));
}

async function denseLayer(layer: tf.layers.Layer, activation: string | null): Promise<object> {
  const [kernel, bias] = layer.getWeights();
  const out: Record<string, unknown> = {
    kind: "dense",
    W: transpose((await kernel.array()) as Matrix),
    b: (await bias.array()) as number[],
  };
  if (activation) out.activation = activation;
  return out;
}

async function rnnCell(layer: tf.layers.Layer): Promise<object> {
  const [kernel, recurrent, bias] = layer.getWeights();
  return {
    kind: "recurrent-cell",
    activation: "tanh",
    W_x: transpose((await kernel.array()) as Matrix),
    W_h: transpose((await recurrent.array()) as Matrix),
    b: (await bias.array()) as number[],
  };
}

async function lstmCell(layer: tf.layers.Layer, hidden: number): Promise<object> {
  const [kernel, recurrent, bias] = layer.getWeights();
  const k = (await kernel.array()) as Matrix;
  const u = (await recurrent.array()) as Matrix;
  const b = (await bias.array()) as number[];
  const gates = ["i", "f", "c", "o"]; // tfjs column order
  const out: Record<string, unknown> = { kind: "lstm-cell" };
  gates.forEach((g, idx) => {
    out[`W_${g}`] = transpose(slice(k, idx * hidden, hidden));
    out[`U_${g}`] = transpose(slice(u, idx * hidden, hidden));
    out[`b_${g}`] = b.slice(idx * hidden, (idx + 1) * hidden);
  });
  return out;
}

async function toWeightDoc(result: TrainResult, opts: TrainOptions): Promise<object> {
  const layers: object[] = [];
  for (const layer of result.model.layers) {
    const name = layer.getClassName();
    if (name === "Dense") {
      const cfg = layer.getConfig() as { activation?: string };
      const act = cfg.activation && cfg.activation !== "linear" ? cfg.activation : null;
      layers.push(await denseLayer(layer, act));
    } else if (name === "SimpleRNN") {
      layers.push(await rnnCell(layer));
    } else if (name === "LSTM") {
      layers.push(await lstmCell(layer, opts.hidden));
    } else {
      throw new Error(`layer class '${name}' has no weight-file representation`);
    }
  }
  return {
    format_version: 1,
    input_arity: result.inputArity,
    sequence_length: result.sequenceLength,
    labels: result.labelNames,
    layers,
  };
}

/** Golden pairs from the exporter's own forward pass (tf.predict). */
async function goldenPairs(result: TrainResult, opts: TrainOptions, count: number) {
  const ds = makeDataset(opts.arch, opts.frames, opts.seed + 2000, count);
  const flat = tf.tensor2d(ds.inputs);
  const xs =
    opts.arch === "fnn"
      ? flat
      : flat.reshape([ds.inputs.length, opts.frames, FRAME_SIZE]);
  const logits = (await (result.model.predict(xs) as tf.Tensor).array()) as Matrix;
  flat.dispose();
  return ds.inputs.map((input, i) => ({ input, logits: logits[i] }));
}

export async function trainAndExport(opts: TrainOptions, outDir: string): Promise<ExportBundle> {
  if (!["fnn", "rnn", "lstm"].includes(opts.arch)) {
    throw new Error(`unsupported architecture '${opts.arch}'`);
  }
  const result = await train(opts);
  const doc = await toWeightDoc(result, opts);
  const golden = {
    format_version: 1,
    provenance: {
      dataset: result.dataset.name,
      arch: opts.arch,
      frames: opts.frames,
      hidden: opts.hidden,
      seed: opts.seed,
      epochs: opts.epochs ?? 40,
      accuracy: result.accuracy,
    },
    pairs: await goldenPairs(result, opts, 12),
  };
  fs.mkdirSync(outDir, { recursive: true });
  const weightFile = path.join(outDir, "model.json");
  const goldenFile = path.join(outDir, "golden.json");
  fs.writeFileSync(weightFile, JSON.stringify(doc, null, 1) + "\n");
  fs.writeFileSync(goldenFile, JSON.stringify(golden, null, 1) + "\n");
  return { weightFile, goldenFile, accuracy: result.accuracy };
}

export { rng };
