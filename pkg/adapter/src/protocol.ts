/** The gaia-eval line protocol: one handshake line, then one JSON response
 * per JSON request line. Unknown request fields are ignored; a request that
 * cannot be parsed still gets a response carrying whatever id was salvaged. */

import { ArchSpec } from "./model.js";
import { Fidelity } from "./trainer.js";

export const PROTOCOL = "gaia-eval";
export const VERSION = 1;

export interface Request {
  id: string;
  arch: ArchSpec;
  fidelity: Fidelity;
  task: string;
}

export class RequestError extends Error {
  constructor(
    message: string,
    readonly id: string | null,
  ) {
    super(message);
  }
}

export function handshakeLine(): string {
  return JSON.stringify({ protocol: PROTOCOL, version: VERSION });
}

const FIDELITIES: readonly string[] = ["direct", "fast", "full"];

function isPositiveIntArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.length > 0 && v.every((x) => Number.isInteger(x) && x > 0);
}

export function parseRequest(line: string): Request {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    throw new RequestError(`malformed request line: ${line.slice(0, 80)}`, null);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new RequestError("request is not an object", null);
  }
  const rec = obj as Record<string, unknown>;
  const id =
    typeof rec.id === "string" || typeof rec.id === "number" ? String(rec.id) : null;
  const fail = (msg: string): never => {
    throw new RequestError(msg, id);
  };
  if (id === null) fail("request has no usable id");
  if (typeof rec.task !== "string") fail("request field 'task' must be a string");
  if (typeof rec.fidelity !== "string" || !FIDELITIES.includes(rec.fidelity)) {
    fail(`request field 'fidelity' must be one of ${FIDELITIES.join("/")}`);
  }
  const arch = rec.arch as Record<string, unknown> | undefined;
  if (typeof arch !== "object" || arch === null) fail("request field 'arch' missing");
  const depths = arch!.depths;
  const widths = arch!.widths;
  const scale = arch!.scale;
  if (!isPositiveIntArray(depths)) fail("arch.depths must be positive integers");
  if (!isPositiveIntArray(widths) || (widths as number[]).length !== (depths as number[]).length + 1) {
    fail("arch.widths must be positive integers, one longer than depths");
  }
  if (typeof scale !== "number" || !Number.isFinite(scale) || scale <= 0) {
    fail("arch.scale must be a positive number");
  }
  return {
    id: id!,
    arch: { depths: depths as number[], widths: widths as number[], scale: scale as number },
    fidelity: rec.fidelity as Fidelity,
    task: rec.task as string,
  };
}
