/** Wire protocol: frames from the stream service, commands back to it. */

export const SCHEMA_VERSION = 1;

export interface ActionValues {
  f1: number;
  f2: number;
  f3: number;
  alpha1: number;
  alpha2: number;
}

export interface CompressedAttr {
  distance: number;
  velocity: number;
  obstacle: number;
  heading: number;
}

export interface AttrBlock {
  raw: number[][];
  combined: number[];
  compressed: CompressedAttr;
  degenerate: boolean;
  leaf_id?: number | null;
}

export interface Frame {
  v: number;
  t: number;
  step: number;
  pose: { x: number; y: number; psi: number };
  state: number[];
  action: ActionValues;
  controller?: ActionValues;
  surrogate?: ActionValues;
  attr: AttrBlock | null;
  forces: { fx: number; fy: number; torque: number };
  reward: { total: number; r_dd: number; r_psi: number; r_obs: number; r_ddot: number };
  mode: "auto" | "human";
  outcome?: string;
}

export interface DoneMessage {
  done: true;
  outcome: string | null;
}

export interface Ack {
  ok?: string;
  err?: string;
}

export type ServerMessage =
  | { kind: "frame"; frame: Frame }
  | { kind: "done"; outcome: string | null }
  | { kind: "ack"; ack: Ack }
  | { kind: "ignored" };

/** Classify one server message; unknown fields and shapes never throw. */
export function parseServerMessage(text: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return { kind: "ignored" };
  }
  if (typeof raw !== "object" || raw === null) return { kind: "ignored" };
  const msg = raw as Record<string, unknown>;
  if (msg["done"] === true) {
    return { kind: "done", outcome: (msg["outcome"] as string) ?? null };
  }
  if (typeof msg["step"] === "number" && Array.isArray(msg["state"])) {
    return { kind: "frame", frame: msg as unknown as Frame };
  }
  if ("ok" in msg || "err" in msg) {
    return { kind: "ack", ack: msg as Ack };
  }
  return { kind: "ignored" };
}

export type Command =
  | { cmd: "pause" }
  | { cmd: "resume" }
  | { cmd: "takeover" }
  | { cmd: "release" }
  | { cmd: "set_speed"; factor: number }
  | { cmd: "set_action"; action: ActionValues };

export function encodeCommand(command: Command): string {
  return JSON.stringify(command);
}

/** Physical command ranges; slider bounds equal these by construction. */
export const ACTION_RANGES: Record<keyof ActionValues, [number, number]> = {
  f1: [-70, 100],
  f2: [-70, 100],
  f3: [-50, 50],
  alpha1: [-Math.PI / 2, Math.PI / 2],
  alpha2: [-Math.PI / 2, Math.PI / 2],
};
