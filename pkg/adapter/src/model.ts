/** A plain ReLU MLP standing in for a detector.
 *
 * The architecture maps on proportionally: every width is scaled by one
 * global factor chosen so the widest layer of the largest anchor lands on
 * the configured unit budget, and each stage contributes `depth` hidden
 * layers of its scaled width. The input scale sets how many batches make
 * up an epoch, so higher resolutions cost more work, as they would on a
 * real trainer.
 */

import { Rng } from "./rng.js";

export interface ArchSpec {
  depths: number[];
  widths: number[];
  scale: number;
}

/** Widest layer of the largest anchor; the unit budget divides this. */
export const REFERENCE_MAX_WIDTH = 640;

export function archKey(arch: ArchSpec): string {
  return `${arch.depths.join(",")}|${arch.widths.join(",")}|${arch.scale}`;
}

/** Hidden layer sizes: stem once, then depth repeats of each stage width. */
export function hiddenDims(arch: ArchSpec, maxHiddenUnits: number): number[] {
  const f = maxHiddenUnits / REFERENCE_MAX_WIDTH;
  // floor of 4: depth-scaled toys die of dead units below that
  const scaled = (w: number) => Math.max(4, Math.round(w * f));
  const dims = [scaled(arch.widths[0])];
  arch.depths.forEach((depth, stage) => {
    for (let i = 0; i < depth; i++) {
      dims.push(scaled(arch.widths[stage + 1]));
    }
  });
  return dims;
}

export function batchesPerEpoch(arch: ArchSpec): number {
  return Math.max(1, Math.round(arch.scale / 10));
}

export interface Model {
  dims: number[]; // input, hidden..., classes
  weights: Float64Array[]; // weights[l] is dims[l] x dims[l+1], row-major
  biases: Float64Array[];
}

export function initModel(dims: number[], rng: Rng): Model {
  const weights: Float64Array[] = [];
  const biases: Float64Array[] = [];
  for (let l = 0; l < dims.length - 1; l++) {
    const fanIn = dims[l];
    const w = new Float64Array(dims[l] * dims[l + 1]);
    const std = Math.sqrt(2 / fanIn);
    for (let i = 0; i < w.length; i++) {
      w[i] = std * rng.normal();
    }
    weights.push(w);
    biases.push(new Float64Array(dims[l + 1]));
  }
  return { dims, weights, biases };
}

/** Post-activation values per layer; the last entry holds raw logits. */
export function forward(model: Model, x: number[]): Float64Array[] {
  const acts: Float64Array[] = [Float64Array.from(x)];
  for (let l = 0; l < model.weights.length; l++) {
    const inAct = acts[l];
    const nIn = model.dims[l];
    const nOut = model.dims[l + 1];
    const out = new Float64Array(nOut);
    const w = model.weights[l];
    for (let i = 0; i < nIn; i++) {
      const a = inAct[i];
      if (a === 0) continue;
      const row = i * nOut;
      for (let j = 0; j < nOut; j++) {
        out[j] += a * w[row + j];
      }
    }
    const last = l === model.weights.length - 1;
    for (let j = 0; j < nOut; j++) {
      out[j] += model.biases[l][j];
      if (!last && out[j] < 0) out[j] = 0;
    }
    acts.push(out);
  }
  return acts;
}

function softmax(logits: Float64Array): Float64Array {
  let max = -Infinity;
  for (const v of logits) max = Math.max(max, v);
  const p = new Float64Array(logits.length);
  let z = 0;
  for (let j = 0; j < logits.length; j++) {
    p[j] = Math.exp(logits[j] - max);
    z += p[j];
  }
  for (let j = 0; j < p.length; j++) p[j] /= z;
  return p;
}

/** One SGD step on a mini-batch of rows; returns the mean cross-entropy.
 *
 * headLossWeight multiplies the updates of the final (head) layer only;
 * the backbone layers train at the base rate.
 */
export function sgdStep(
  model: Model,
  xs: number[][],
  ys: number[],
  lr: number,
  headLossWeight: number,
): number {
  const nLayers = model.weights.length;
  const gradW = model.weights.map((w) => new Float64Array(w.length));
  const gradB = model.biases.map((b) => new Float64Array(b.length));
  let loss = 0;
  for (let s = 0; s < xs.length; s++) {
    const acts = forward(model, xs[s]);
    const probs = softmax(acts[nLayers]);
    loss -= Math.log(Math.max(probs[ys[s]], 1e-12));
    let delta = Float64Array.from(probs);
    delta[ys[s]] -= 1;
    for (let l = nLayers - 1; l >= 0; l--) {
      const inAct = acts[l];
      const nIn = model.dims[l];
      const nOut = model.dims[l + 1];
      const w = model.weights[l];
      const next = new Float64Array(nIn);
      for (let i = 0; i < nIn; i++) {
        const a = inAct[i];
        const row = i * nOut;
        let back = 0;
        for (let j = 0; j < nOut; j++) {
          const d = delta[j];
          gradW[l][row + j] += a * d;
          back += w[row + j] * d;
        }
        // ReLU gate; the input layer has no activation to gate
        next[i] = l > 0 && inAct[i] === 0 ? 0 : back;
      }
      for (let j = 0; j < nOut; j++) gradB[l][j] += delta[j];
      delta = next;
    }
  }
  const scale = 1 / xs.length;
  for (let l = 0; l < nLayers; l++) {
    const step = lr * scale * (l === nLayers - 1 ? headLossWeight : 1);
    for (let i = 0; i < gradW[l].length; i++) {
      model.weights[l][i] -= step * gradW[l][i];
    }
    for (let j = 0; j < gradB[l].length; j++) {
      model.biases[l][j] -= step * gradB[l][j];
    }
  }
  return loss / xs.length;
}

export function accuracy(model: Model, xs: number[][], ys: number[]): number {
  let hits = 0;
  for (let s = 0; s < xs.length; s++) {
    const logits = forward(model, xs[s])[model.weights.length];
    let best = 0;
    for (let j = 1; j < logits.length; j++) {
      if (logits[j] > logits[best]) best = j;
    }
    if (best === ys[s]) hits++;
  }
  return hits / xs.length;
}
