/** Stdio serving loop: handshake first, then exactly one response line per
 * input line, errors included, until the input closes. Requests are handled
 * strictly one at a time; callers wanting parallelism run more processes. */

import { createInterface } from "node:readline";
import { handshakeLine, parseRequest, RequestError } from "./protocol.js";
import { AdapterConfig, runRequest, TrainingFailure, UnknownTask } from "./trainer.js";

export function handleLine(cfg: AdapterConfig, line: string): Record<string, unknown> {
  let req;
  try {
    req = parseRequest(line);
  } catch (err) {
    if (err instanceof RequestError) {
      return { id: err.id, error: err.message };
    }
    throw err;
  }
  try {
    const t0 = process.hrtime.bigint();
    const out = runRequest(cfg, req.task, req.arch, req.fidelity);
    const costS = Number(process.hrtime.bigint() - t0) / 1e9;
    return {
      id: req.id,
      metric: out.metric,
      metric_name: out.metricName,
      cost_s: costS,
      epochs: out.epochs,
    };
  } catch (err) {
    if (err instanceof UnknownTask || err instanceof TrainingFailure) {
      return { id: req.id, error: err.message };
    }
    throw err;
  }
}

export async function serve(
  cfg: AdapterConfig,
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream,
): Promise<void> {
  output.write(handshakeLine() + "\n");
  const lines = createInterface({ input, crlfDelay: Infinity });
  for await (const line of lines) {
    output.write(JSON.stringify(handleLine(cfg, line)) + "\n");
  }
}
