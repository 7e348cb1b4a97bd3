/** Console state: a reducer over server messages and local events.
 *
 * Everything rendered is traceable to a frame field; the mode mirror only
 * changes when a served frame confirms it, never when a command is sent.
 */

import type { Frame, ServerMessage } from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface ConsoleState {
  connection: Connection;
  latestFrame: Frame | null;
  lastFrameAt: number | null; // ms timestamp of the last frame
  mode: "auto" | "human"; // mirror of the served mode
  outcome: string | null;
  lastError: string | null;
  playbackFactor: number;
}

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    latestFrame: null,
    lastFrameAt: null,
    mode: "auto",
    outcome: null,
    lastError: null,
    playbackFactor: 1,
  };
}

export function applyMessage(
  state: ConsoleState,
  message: ServerMessage,
  now: number,
): ConsoleState {
  switch (message.kind) {
    case "frame":
      return {
        ...state,
        latestFrame: message.frame,
        lastFrameAt: now,
        mode: message.frame.mode,
        outcome: message.frame.outcome ?? state.outcome,
        lastError: null,
      };
    case "done":
      return { ...state, outcome: message.outcome };
    case "ack":
      return message.ack.err
        ? { ...state, lastError: message.ack.err }
        : state;
    default:
      return state;
  }
}

export function setConnection(state: ConsoleState, connection: Connection): ConsoleState {
  return { ...state, connection };
}

/** A frame older than two seconds of wall time counts as stale. */
export function isStale(state: ConsoleState, now: number): boolean {
  if (state.lastFrameAt === null) return false;
  return now - state.lastFrameAt > 2000;
}
