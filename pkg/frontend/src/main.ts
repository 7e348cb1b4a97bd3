/** Console wiring: WebSocket, map canvas, attribution bars, intervention UI. */

import { computeBars } from "./bars.js";
import {
  drawHarbor,
  drawVessel,
  fitViewport,
  ScenarioGeometry,
  ThrusterInfo,
  Viewport,
} from "./map.js";
import {
  ACTION_RANGES,
  ActionValues,
  encodeCommand,
  parseServerMessage,
} from "./protocol.js";
import {
  applyMessage,
  ConsoleState,
  initialState,
  isStale,
  setConnection,
} from "./state.js";

const SLIDER_SEND_INTERVAL_MS = 120;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const scenario = await fetch("/scenario").then((r) => r.json());
  const geometry: ScenarioGeometry = scenario.geometry;
  const thrusters: ThrusterInfo[] = scenario.thrusters;

  const canvas = el<HTMLCanvasElement>("map");
  const ctx = canvas.getContext("2d")!;
  const view: Viewport = fitViewport(geometry, canvas.width, canvas.height);

  let state: ConsoleState = initialState();
  const pending: Partial<ActionValues> = {};
  let lastSent = 0;

  const ws = new WebSocket(`ws://${location.host}/ws`);
  ws.onopen = () => {
    state = setConnection(state, "open");
  };
  ws.onclose = () => {
    state = setConnection(state, "closed");
    render();
  };
  ws.onmessage = (event) => {
    state = applyMessage(state, parseServerMessage(event.data), Date.now());
    render();
  };

  const send = (command: Parameters<typeof encodeCommand>[0]) => {
    if (ws.readyState === WebSocket.OPEN) ws.send(encodeCommand(command));
  };

  el<HTMLButtonElement>("takeover").onclick = () => send({ cmd: "takeover" });
  el<HTMLButtonElement>("release").onclick = () => send({ cmd: "release" });
  el<HTMLButtonElement>("pause").onclick = () => send({ cmd: "pause" });
  el<HTMLButtonElement>("resume").onclick = () => send({ cmd: "resume" });
  el<HTMLInputElement>("speed").onchange = (e) => {
    send({ cmd: "set_speed", factor: Number((e.target as HTMLInputElement).value) });
  };

  const sliderKeys: (keyof ActionValues)[] = ["f1", "f2", "f3", "alpha1", "alpha2"];
  for (const key of sliderKeys) {
    const slider = el<HTMLInputElement>(`slider-${key}`);
    const [lo, hi] = ACTION_RANGES[key];
    slider.min = String(lo);
    slider.max = String(hi);
    slider.step = key.startsWith("alpha") ? "0.01" : "1";
    slider.value = "0";
    slider.oninput = () => {
      pending[key] = Number(slider.value);
      maybeSendSliders();
    };
  }

  function maybeSendSliders(): void {
    // throttled zero-order-hold updates; only meaningful in takeover
    const now = Date.now();
    if (now - lastSent < SLIDER_SEND_INTERVAL_MS || state.mode !== "human") return;
    lastSent = now;
    const current = state.latestFrame?.action ?? {
      f1: 0, f2: 0, f3: 0, alpha1: 0, alpha2: 0,
    };
    send({ cmd: "set_action", action: { ...current, ...pending } });
  }

  function render(): void {
    const frame = state.latestFrame;
    el("connection").textContent =
      state.connection + (isStale(state, Date.now()) ? " (stale)" : "");
    el("mode").textContent = state.mode.toUpperCase();
    el("mode").className = state.mode === "human" ? "badge human" : "badge auto";
    el("outcome").textContent = state.outcome ?? "";
    el("error").textContent = state.lastError ?? "";
    if (!frame) return;

    drawHarbor(ctx, view, geometry);
    drawVessel(ctx, view, geometry, frame, thrusters);

    el("step").textContent = `step ${frame.step} / t=${frame.t.toFixed(1)}s`;
    el("reward").textContent =
      `reward ${frame.reward.total.toFixed(2)} ` +
      `(dist ${frame.reward.r_dd.toFixed(2)}, head ${frame.reward.r_psi.toFixed(2)}, ` +
      `obst ${frame.reward.r_obs.toFixed(2)}, rate ${frame.reward.r_ddot.toFixed(2)})`;
    el("forces").textContent =
      `Fx ${frame.forces.fx.toFixed(1)} kN, Fy ${frame.forces.fy.toFixed(1)} kN, ` +
      `T ${frame.forces.torque.toFixed(0)} kN·m`;

    const attr = frame.attr;
    const bars = computeBars(attr ? attr.compressed : null, attr?.degenerate ?? false);
    el("badge").style.display = bars.showNoExplanationBadge ? "block" : "none";
    for (const bar of bars.bars) {
      const fill = el(`bar-${bar.key}`);
      fill.style.height = `${Math.round(bar.height * 100)}%`;
      fill.title = bar.value.toFixed(3);
    }
  }

  setInterval(render, 1000); // staleness indicator refresh
}

boot().catch((err) => {
  document.body.textContent = `console failed to start: ${err}`;
});
