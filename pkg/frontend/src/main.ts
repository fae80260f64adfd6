import { GazeProxy } from "./gazeProxy.js";
import { DEFAULT_STRATEGY, type ServerMsg, type StrategyConfig } from "./protocol.js";
import { renderState, type DragBox } from "./render.js";
import { ViewModel } from "./viewModel.js";
import { connectSession, type Channel } from "./ws.js";

const SCALE = 4;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("canvas");
  const ctx = canvas.getContext("2d")!;
  const vm = new ViewModel();
  const proxy = new GazeProxy();
  let channel: Channel | null = null;
  let sliceImage: HTMLImageElement | null = null;
  let dragBox: DragBox | null = null;
  let connected = false;

  const caseInput = el<HTMLInputElement>("case-id");
  const structureInput = el<HTMLInputElement>("structure");
  const modeSelect = el<HTMLSelectElement>("mode");
  const strategySelect = el<HTMLSelectElement>("strategy");
  const alphaInput = el<HTMLInputElement>("alpha");
  const kInput = el<HTMLInputElement>("k");
  const status = el<HTMLDivElement>("status");
  const banner = el<HTMLDivElement>("banner");

  function setControlsFrozen(frozen: boolean): void {
    // strategy choices are pinned while a structure is being corrected
    for (const node of [structureInput, modeSelect, strategySelect, alphaInput, kInput]) {
      node.disabled = frozen;
    }
  }

  function redraw(): void {
    renderState(ctx, vm, sliceImage, null, dragBox, SCALE);
    const bits = [
      `phase: ${vm.phase}`,
      vm.maskIteration >= 0 ? `iteration: ${vm.maskIteration}` : "",
      vm.dice !== null ? `dice: ${vm.dice.toFixed(4)}` : "",
      vm.elapsedMs !== null ? `elapsed: ${(vm.elapsedMs / 1000).toFixed(1)} s` : "",
      connected ? "" : "RECONNECTING",
    ].filter(Boolean);
    status.textContent = bits.join("  |  ");
    banner.textContent = vm.banner ?? "";
    banner.style.display = vm.banner ? "block" : "none";
  }

  function handleMsg(msg: ServerMsg): void {
    if (!vm.apply(msg)) return; // stale mask dropped
    if (msg.type === "case_loaded") {
      sliceImage = new Image();
      sliceImage.onload = redraw;
      sliceImage.src = `data:image/png;base64,${msg.image_png_b64}`;
    }
    if (msg.type === "done") {
      proxy.stop();
      setControlsFrozen(false);
    }
    redraw();
  }

  function connect(): void {
    channel = connectSession(`ws://${location.host}/v1/session`, handleMsg, (up) => {
      connected = up;
      if (up) channel?.send({ type: "hello", client: "workstation", proto: 1 });
      redraw();
    });
  }

  el<HTMLButtonElement>("load").onclick = () => {
    channel?.send({ type: "load_case", case_id: caseInput.value, slice_index: 0 });
  };

  el<HTMLButtonElement>("start").onclick = () => {
    const mode = modeSelect.value as "gaze" | "bbox";
    const strategy: StrategyConfig = {
      ...DEFAULT_STRATEGY,
      kind: strategySelect.value as StrategyConfig["kind"],
      alpha: Number(alphaInput.value),
      k: Number(kInput.value),
    };
    if (!channel?.send({ type: "start_structure", structure: structureInput.value, mode, strategy })) {
      return;
    }
    vm.startStructure(structureInput.value, mode);
    setControlsFrozen(true);
    if (mode === "gaze") {
      proxy.start((batch) => channel!.send({ type: "gaze", samples: batch }));
    }
    redraw();
  };

  canvas.addEventListener("pointermove", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    proxy.movePointer(x / SCALE, y / SCALE); // canvas pixels -> image coords (identity viewport)
    if (vm.phase === "segmenting" && vm.mode === "gaze") {
      vm.pushTrail(x / SCALE, y / SCALE, performance.now());
    }
    if (dragBox) {
      dragBox.x1 = x / SCALE;
      dragBox.y1 = y / SCALE;
      redraw();
    }
  });

  canvas.addEventListener("pointerdown", (ev) => {
    if (vm.phase !== "segmenting" || vm.mode !== "bbox") return;
    const rect = canvas.getBoundingClientRect();
    const x = (ev.clientX - rect.left) / SCALE;
    const y = (ev.clientY - rect.top) / SCALE;
    dragBox = { x0: x, y0: y, x1: x, y1: y };
  });

  canvas.addEventListener("pointerup", () => {
    if (!dragBox || !channel) return;
    const r0 = Math.floor(Math.min(dragBox.y0, dragBox.y1));
    const r1 = Math.floor(Math.max(dragBox.y0, dragBox.y1));
    const c0 = Math.floor(Math.min(dragBox.x0, dragBox.x1));
    const c1 = Math.floor(Math.max(dragBox.x0, dragBox.x1));
    channel.send({ type: "box", r0, c0, r1, c1 });
    dragBox = null;
    redraw();
  });

  document.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter" && vm.phase === "segmenting") {
      channel?.send({ type: "key", name: "Enter" });
    }
  });

  connect();
  redraw();
}

main();
