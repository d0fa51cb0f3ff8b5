/**
 * Builds and trains the miniature classifiers.
 *
 * All weight initializers are seeded and fitting runs without shuffling, so a
 * given (arch, frames, hidden, seed) always produces the same weights.
 */

import * as tf from "@tensorflow/tfjs";
import { Dataset, digits4x4, sequences, FRAME_SIZE } from "./data.js";

export type Arch = "fnn" | "rnn" | "lstm";

export interface TrainResult {
  model: tf.LayersModel;
  dataset: Dataset;
  accuracy: number;
  inputArity: number;
  sequenceLength: number;
  labelNames: string[];
}

export interface TrainOptions {
  arch: Arch;
  frames: number;
  hidden: number;
  seed: number;
  epochs?: number;
}

function buildModel(opts: TrainOptions, numClasses: number): tf.LayersModel {
  const { arch, frames, hidden, seed } = opts;
  const init = (offset: number) => tf.initializers.glorotUniform({ seed: seed + offset });
  const model = tf.sequential();
  if (arch === "fnn") {
    model.add(
      tf.layers.dense({
        inputShape: [16],
        units: hidden,
        activation: "tanh",
        kernelInitializer: init(1),
      })
    );
  } else if (arch === "rnn") {
    model.add(
      tf.layers.simpleRNN({
        inputShape: [frames, FRAME_SIZE],
        units: hidden,
        activation: "tanh",
        kernelInitializer: init(1),
        recurrentInitializer: init(2),
      })
    );
  } else if (arch === "lstm") {
    model.add(
      tf.layers.lstm({
        inputShape: [frames, FRAME_SIZE],
        units: hidden,
        // the importer's cell uses a plain sigmoid; tfjs defaults to hardSigmoid
        recurrentActivation: "sigmoid",
        kernelInitializer: init(1),
        recurrentInitializer: init(2),
      })
    );
  } else {
    throw new Error(`unsupported architecture '${arch}'`);
  }
  // logits head: no activation, so exported outputs are pre-softmax;
  // the loss applies the softmax itself
  model.add(tf.layers.dense({ units: numClasses, kernelInitializer: init(3) }));
  model.compile({
    optimizer: tf.train.adam(0.02),
    loss: (yTrue, yPred) => tf.losses.softmaxCrossEntropy(yTrue, yPred),
  });
  return model;
}

export function makeDataset(arch: Arch, frames: number, seed: number, count: number): Dataset {
  return arch === "fnn" ? digits4x4(count, seed) : sequences(count, frames, seed);
}

function toTensors(arch: Arch, frames: number, ds: Dataset): { xs: tf.Tensor; ys: tf.Tensor } {
  const flat = tf.tensor2d(ds.inputs);
  const xs = arch === "fnn" ? flat : flat.reshape([ds.inputs.length, frames, FRAME_SIZE]);
  const classes = ds.labelNames.length;
  const ys = tf.oneHot(tf.tensor1d(ds.labels, "int32"), classes).cast("float32");
  return { xs, ys };
}

export async function train(opts: TrainOptions): Promise<TrainResult> {
  const { arch, frames } = opts;
  const trainSet = makeDataset(arch, frames, opts.seed, 240);
  const testSet = makeDataset(arch, frames, opts.seed + 1000, 60);
  const numClasses = trainSet.labelNames.length;
  const model = buildModel(opts, numClasses);

  const epochs = opts.epochs ?? 40;
  if (epochs > 0) {
    const { xs, ys } = toTensors(arch, frames, trainSet);
    await model.fit(xs, ys, { epochs, batchSize: 32, shuffle: false, verbose: 0 });
    xs.dispose();
    ys.dispose();
  }

  const { xs: tx, ys: ty } = toTensors(arch, frames, testSet);
  const pred = (model.predict(tx) as tf.Tensor).argMax(-1);
  const accuracy = (await pred.equal(ty.argMax(-1)).cast("float32").mean().data())[0];
  tx.dispose();
  ty.dispose();
  pred.dispose();

  return {
    model,
    dataset: trainSet,
    accuracy,
    inputArity: arch === "fnn" ? 16 : frames * FRAME_SIZE,
    sequenceLength: arch === "fnn" ? 1 : frames,
    labelNames: trainSet.labelNames,
  };
}
