import { Readable, Writable } from "node:stream";
import { describe, expect, it } from "vitest";

import { REFERENCE_MAX_WIDTH, hiddenDims, batchesPerEpoch } from "../src/model.js";
import { handshakeLine, parseRequest, RequestError } from "../src/protocol.js";
import { handleLine, serve } from "../src/serve.js";
import { defaultConfig, epochsFor, learningRate, runRequest } from "../src/trainer.js";

const ARCH = { depths: [2, 2, 4, 2], widths: [32, 48, 96, 192, 384], scale: 480 };

function requestLine(id: string, fidelity: string, task = "blobs", arch: object = ARCH): string {
  return JSON.stringify({ id, arch, fidelity, task });
}

async function collect(cfg: ReturnType<typeof defaultConfig>, lines: string[]): Promise<string[]> {
  const out: string[] = [];
  const sink = new Writable({
    write(chunk, _enc, cb) {
      out.push(...chunk.toString().split("\n").filter(Boolean));
      cb();
    },
  });
  await serve(cfg, Readable.from(lines.map((l) => l + "\n")), sink);
  return out;
}

describe("protocol", () => {
  it("handshake names the protocol and version", () => {
    expect(JSON.parse(handshakeLine())).toEqual({ protocol: "gaia-eval", version: 1 });
  });

  it("parses a well-formed request and ignores unknown fields", () => {
    const req = parseRequest(requestLine("r1", "fast") .replace("}", ', "extra": 7}'));
    expect(req.id).toBe("r1");
    expect(req.fidelity).toBe("fast");
    expect(req.arch.scale).toBe(480);
  });

  it("rejects bad requests but salvages the id when present", () => {
    expect(() => parseRequest("not json")).toThrowError(RequestError);
    try {
      parseRequest(JSON.stringify({ id: "r2", arch: ARCH, fidelity: "warp", task: "blobs" }));
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(RequestError);
      expect((err as RequestError).id).toBe("r2");
    }
    try {
      parseRequest(JSON.stringify({ id: "r3", arch: { ...ARCH, widths: [1, 2] }, fidelity: "full", task: "blobs" }));
      expect.unreachable();
    } catch (err) {
      expect((err as RequestError).id).toBe("r3");
    }
  });
});

describe("serve loop", () => {
  it("answers every line with a matching id, errors included", async () => {
    const cfg = defaultConfig({ baseEpochs: 10, seed: 7 });
    const lines = await collect(cfg, [
      requestLine("a", "direct"),
      "garbage {",
      requestLine("b", "fast"),
      requestLine("c", "full", "no-such-task"),
      requestLine("d", "full"),
    ]);
    expect(lines).toHaveLength(6);
    expect(JSON.parse(lines[0])).toEqual({ protocol: "gaia-eval", version: 1 });
    const [a, garbage, b, c, d] = lines.slice(1).map((l) => JSON.parse(l));
    expect(a.id).toBe("a");
    expect(a.epochs).toBe(0);
    expect(garbage.id).toBeNull();
    expect(garbage.error).toMatch(/malformed/);
    expect(b.id).toBe("b");
    expect(b.epochs).toBe(2);
    expect(c.id).toBe("c");
    expect(c.error).toMatch(/unknown task/);
    expect(d.id).toBe("d");
    expect(d.epochs).toBe(10);
    for (const resp of [a, b, d]) {
      expect(Number.isFinite(resp.metric)).toBe(true);
      expect(resp.metric_name).toBe("val_acc");
      expect(resp.cost_s).toBeGreaterThanOrEqual(0);
    }
  });

  it("reports a training failure instead of dying", () => {
    const cfg = defaultConfig({ lr: 1e9, seed: 1 });
    const resp = handleLine(cfg, requestLine("boom", "full"));
    expect(resp.id).toBe("boom");
    expect(String(resp.error)).toMatch(/diverged|non-finite/);
  });
});

describe("fidelity semantics", () => {
  it("epoch counts follow the multipliers exactly", () => {
    const cfg = defaultConfig({ baseEpochs: 10 });
    expect(epochsFor(cfg, "direct")).toBe(0);
    expect(epochsFor(cfg, "fast")).toBe(2);
    expect(epochsFor(cfg, "full")).toBe(10);
    const cfg24 = defaultConfig({ baseEpochs: 24 });
    expect(epochsFor(cfg24, "fast")).toBe(5);
    expect(epochsFor(cfg24, "full")).toBe(24);
  });

  it("fast at E=10 runs exactly two logged epochs", () => {
    const cfg = defaultConfig({ baseEpochs: 10, seed: 3 });
    const out = runRequest(cfg, "blobs", ARCH, "fast");
    expect(out.epochs).toBe(2);
    expect(out.epochLosses).toHaveLength(2);
  });

  it("identical full requests with a fixed seed give equal metrics", () => {
    const cfg = defaultConfig({ baseEpochs: 10, seed: 11 });
    const first = runRequest(cfg, "blobs", ARCH, "full");
    const second = runRequest(cfg, "blobs", ARCH, "full");
    expect(second.metric).toBe(first.metric);
    expect(second.epochLosses).toEqual(first.epochLosses);
  });

  it("training beats the inherited-weight probe on an easy task", () => {
    const cfg = defaultConfig({ baseEpochs: 10, seed: 5 });
    const direct = runRequest(cfg, "blobs", ARCH, "direct").metric;
    const full = runRequest(cfg, "blobs", ARCH, "full").metric;
    expect(full).toBeGreaterThan(direct);
    expect(full).toBeGreaterThan(0.9);
  });

  it("rejects multipliers outside [0, 1]", () => {
    expect(() => defaultConfig({ multipliers: { full: 1.5, fast: 0.2, direct: 0 } }))
      .toThrowError(RangeError);
    expect(() => defaultConfig({ multipliers: { full: 1, fast: -0.1, direct: 0 } }))
      .toThrowError(RangeError);
  });
});

describe("schedule", () => {
  it("ramps linearly over the first epoch for every fidelity", () => {
    const cfg = defaultConfig({ lr: 0.05 });
    for (const fid of ["fast", "full"] as const) {
      expect(learningRate(cfg, fid, 1, 0, 10)).toBeCloseTo(0.005, 12);
      expect(learningRate(cfg, fid, 1, 9, 10)).toBeCloseTo(0.05, 12);
    }
  });

  it("drops by 10x at 16/24 and 21/24 of the full run", () => {
    const cfg = defaultConfig({ baseEpochs: 24, lr: 0.05 });
    expect(learningRate(cfg, "full", 16, 0, 10)).toBeCloseTo(0.05, 12);
    expect(learningRate(cfg, "full", 17, 0, 10)).toBeCloseTo(0.005, 12);
    expect(learningRate(cfg, "full", 21, 0, 10)).toBeCloseTo(0.005, 12);
    expect(learningRate(cfg, "full", 22, 0, 10)).toBeCloseTo(0.0005, 12);
  });

  it("keeps every post-warmup fast epoch at the decayed rate", () => {
    const cfg = defaultConfig({ baseEpochs: 10, lr: 0.05 });
    expect(learningRate(cfg, "fast", 2, 0, 10)).toBeCloseTo(0.005, 12);
    expect(learningRate(cfg, "fast", 2, 9, 10)).toBeCloseTo(0.005, 12);
  });
});

describe("architecture mapping", () => {
  it("scales widths by one global factor tied to the unit budget", () => {
    const anchor = { depths: [3, 4, 23, 3], widths: [64, 80, 160, 320, 640], scale: 800 };
    const dims = hiddenDims(anchor, 64);
    expect(Math.max(...dims)).toBe(64);
    expect(dims).toHaveLength(1 + 3 + 4 + 23 + 3);
    expect(dims[0]).toBe(Math.round(64 * (64 / REFERENCE_MAX_WIDTH)));
    const half = hiddenDims({ ...anchor, widths: [32, 40, 80, 160, 320] }, 64);
    expect(Math.max(...half)).toBe(32);
  });

  it("converts input scale into batches per epoch", () => {
    expect(batchesPerEpoch({ ...ARCH, scale: 800 })).toBe(80);
    expect(batchesPerEpoch({ ...ARCH, scale: 480 })).toBe(48);
  });
});
