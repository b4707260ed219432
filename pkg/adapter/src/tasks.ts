/** Built-in toy datasets. Each loader is a pure function of its seed, and the
 * data depends only on (task, seed), never on the architecture, so metrics
 * stay comparable across requests. */

import { Rng, hashSeed } from "./rng.js";

export interface Dataset {
  inputDim: number;
  nClasses: number;
  trainX: number[][];
  trainY: number[];
  valX: number[][];
  valY: number[];
}

export type TaskLoader = (seed: number) => Dataset;

function gaussianBlobs(seed: number): Dataset {
  const inputDim = 8;
  const nClasses = 3;
  const rng = new Rng(hashSeed("blobs", seed));
  const centers: number[][] = [];
  for (let c = 0; c < nClasses; c++) {
    centers.push(Array.from({ length: inputDim }, () => 3.0 * rng.normal()));
  }
  const draw = (n: number) => {
    const xs: number[][] = [];
    const ys: number[] = [];
    for (let i = 0; i < n; i++) {
      const c = i % nClasses;
      xs.push(centers[c].map((m) => m + rng.normal()));
      ys.push(c);
    }
    return { xs, ys };
  };
  const train = draw(256);
  const val = draw(128);
  return {
    inputDim,
    nClasses,
    trainX: train.xs,
    trainY: train.ys,
    valX: val.xs,
    valY: val.ys,
  };
}

function concentricRings(seed: number): Dataset {
  const inputDim = 4;
  const rng = new Rng(hashSeed("rings", seed));
  const draw = (n: number) => {
    const xs: number[][] = [];
    const ys: number[] = [];
    for (let i = 0; i < n; i++) {
      const c = i % 2;
      const r = (c === 0 ? 1.0 : 2.5) + 0.2 * rng.normal();
      const theta = 2 * Math.PI * rng.next();
      // two noise coordinates keep the task from being axis-trivial
      xs.push([r * Math.cos(theta), r * Math.sin(theta), rng.normal(), rng.normal()]);
      ys.push(c);
    }
    return { xs, ys };
  };
  const train = draw(256);
  const val = draw(128);
  return {
    inputDim,
    nClasses: 2,
    trainX: train.xs,
    trainY: train.ys,
    valX: val.xs,
    valY: val.ys,
  };
}

export const TASKS: Record<string, TaskLoader> = {
  blobs: gaussianBlobs,
  rings: concentricRings,
};
