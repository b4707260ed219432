/** Fidelity semantics on a real (if tiny) training loop.
 *
 * full   trains for the base epoch count E with the reference schedule:
 *        linear warmup across the first epoch, then a x10 learning-rate
 *        drop at 16/24 and 21/24 of the run.
 * fast   trains for round(0.2 * E) epochs: warmup across the first epoch,
 *        every later epoch at lr / 10.
 * direct evaluates the seeded initial weights, the stand-in for inherited
 *        supernet weights, without any finetuning.
 */

import {
  ArchSpec,
  Model,
  accuracy,
  archKey,
  batchesPerEpoch,
  hiddenDims,
  initModel,
  sgdStep,
} from "./model.js";
import { Rng, hashSeed } from "./rng.js";
import { TASKS, TaskLoader } from "./tasks.js";

export type Fidelity = "direct" | "fast" | "full";

export interface AdapterConfig {
  tasks: Record<string, TaskLoader>;
  baseEpochs: number;
  multipliers: Record<Fidelity, number>;
  lr: number;
  decayFractions: [number, number];
  decayFactor: number;
  headLossWeight: number;
  maxHiddenUnits: number;
  batchSize: number;
  seed: number;
}

export class UnknownTask extends Error {}
export class TrainingFailure extends Error {}

export function defaultConfig(overrides: Partial<AdapterConfig> = {}): AdapterConfig {
  const cfg: AdapterConfig = {
    tasks: TASKS,
    baseEpochs: 10,
    multipliers: { full: 1.0, fast: 0.2, direct: 0.0 },
    lr: 0.01,
    decayFractions: [16 / 24, 21 / 24],
    decayFactor: 10,
    headLossWeight: 5,
    maxHiddenUnits: 64,
    batchSize: 16,
    seed: 0,
    ...overrides,
  };
  for (const [name, m] of Object.entries(cfg.multipliers)) {
    if (!(m >= 0 && m <= 1)) {
      throw new RangeError(`multiplier ${name} must lie in [0, 1], got ${m}`);
    }
  }
  if (cfg.baseEpochs < 1 || !Number.isInteger(cfg.baseEpochs)) {
    throw new RangeError(`base epochs must be a positive integer, got ${cfg.baseEpochs}`);
  }
  return cfg;
}

export function epochsFor(cfg: AdapterConfig, fidelity: Fidelity): number {
  return Math.round(cfg.multipliers[fidelity] * cfg.baseEpochs);
}

/** Learning rate for iteration `iter` of 1-based `epoch`. */
export function learningRate(
  cfg: AdapterConfig,
  fidelity: Fidelity,
  epoch: number,
  iter: number,
  itersPerEpoch: number,
): number {
  if (epoch === 1) {
    return (cfg.lr * (iter + 1)) / itersPerEpoch;
  }
  if (fidelity === "fast") {
    return cfg.lr / cfg.decayFactor;
  }
  const [d1, d2] = cfg.decayFractions.map((f) => Math.round(f * cfg.baseEpochs));
  if (epoch > d2) return cfg.lr / cfg.decayFactor ** 2;
  if (epoch > d1) return cfg.lr / cfg.decayFactor;
  return cfg.lr;
}

export interface TrainOutcome {
  metric: number;
  metricName: string;
  epochs: number;
  epochLosses: number[];
}

export function runRequest(
  cfg: AdapterConfig,
  task: string,
  arch: ArchSpec,
  fidelity: Fidelity,
): TrainOutcome {
  const loader = cfg.tasks[task];
  if (loader === undefined) {
    throw new UnknownTask(`unknown task ${JSON.stringify(task)}`);
  }
  const data = loader(cfg.seed);
  const dims = [data.inputDim, ...hiddenDims(arch, cfg.maxHiddenUnits), data.nClasses];
  const model: Model = initModel(
    dims,
    new Rng(hashSeed("init", cfg.seed, task, archKey(arch))),
  );
  const epochs = epochsFor(cfg, fidelity);
  const iters = batchesPerEpoch(arch);
  const batchRng = new Rng(hashSeed("batch", cfg.seed, task, archKey(arch), fidelity));
  const epochLosses: number[] = [];
  for (let epoch = 1; epoch <= epochs; epoch++) {
    let total = 0;
    for (let iter = 0; iter < iters; iter++) {
      const xs: number[][] = [];
      const ys: number[] = [];
      for (let b = 0; b < cfg.batchSize; b++) {
        const i = batchRng.int(0, data.trainX.length);
        xs.push(data.trainX[i]);
        ys.push(data.trainY[i]);
      }
      const lr = learningRate(cfg, fidelity, epoch, iter, iters);
      total += sgdStep(model, xs, ys, lr, cfg.headLossWeight);
    }
    const mean = total / iters;
    if (!Number.isFinite(mean)) {
      throw new TrainingFailure(`loss diverged in epoch ${epoch} (${mean})`);
    }
    epochLosses.push(mean);
  }
  const metric = accuracy(model, data.valX, data.valY);
  if (!Number.isFinite(metric)) {
    throw new TrainingFailure(`non-finite validation metric (${metric})`);
  }
  return { metric, metricName: "val_acc", epochs, epochLosses };
}
