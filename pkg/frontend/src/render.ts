// DOM/canvas renderers. All decisions live in state.ts; these functions only
// paint whatever the reducer produced.

import { answerInputEnabled } from "./state";
import type { UiSessionState } from "./types";

const CELL_PX = 24;

export function renderChat(container: HTMLElement, state: UiSessionState): void {
  container.innerHTML = "";
  for (const turn of state.chat) {
    const div = document.createElement("div");
    div.className = `turn turn-${turn.kind}`;
    div.textContent =
      turn.kind === "question" ? `agent: ${turn.text}` : turn.kind === "answer" ? `you: ${turn.text}` : turn.text;
    container.appendChild(div);
  }
  for (const error of state.errors) {
    const div = document.createElement("div");
    div.className = "turn turn-error";
    div.textContent = error;
    container.appendChild(div);
  }
  container.scrollTop = container.scrollHeight;
}

export function renderInput(input: HTMLInputElement, button: HTMLButtonElement, state: UiSessionState): void {
  const enabled = answerInputEnabled(state);
  input.disabled = !enabled;
  button.disabled = !enabled;
  input.placeholder = enabled ? "Answer the agent..." : "Waiting for a question...";
}

export function renderStatus(el: HTMLElement, state: UiSessionState): void {
  if (state.result) {
    const r = state.result;
    el.textContent = `${r.outcome} — path ${r.path_length_m} m, ${r.questions_asked} question(s)`;
    el.className = r.success ? "status status-success" : "status status-failure";
    return;
  }
  el.textContent = state.connection;
  el.className = `status status-${state.connection}`;
}

export function renderMap(canvas: HTMLCanvasElement, state: UiSessionState): void {
  const grid = state.map.grid;
  if (!grid.length) return;
  canvas.width = grid[0].length * CELL_PX;
  canvas.height = grid.length * CELL_PX;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  for (let r = 0; r < grid.length; r++) {
    for (let c = 0; c < grid[r].length; c++) {
      ctx.fillStyle = grid[r][c] === 1 ? "#333" : "#f4f1ea";
      ctx.fillRect(c * CELL_PX, r * CELL_PX, CELL_PX - 1, CELL_PX - 1);
    }
  }
  ctx.fillStyle = "#b8d8ff";
  for (const [r, c] of state.map.trail) {
    ctx.fillRect(c * CELL_PX, r * CELL_PX, CELL_PX - 1, CELL_PX - 1);
  }
  for (const marker of state.map.markers) {
    const [r, c] = marker.cell;
    ctx.fillStyle = "#e0a030";
    ctx.beginPath();
    ctx.arc(c * CELL_PX + CELL_PX / 2, r * CELL_PX + CELL_PX / 2, CELL_PX / 3, 0, 2 * Math.PI);
    ctx.fill();
  }
  if (state.map.agentCell) {
    const [r, c] = state.map.agentCell;
    ctx.fillStyle = "#c03030";
    ctx.beginPath();
    ctx.arc(c * CELL_PX + CELL_PX / 2, r * CELL_PX + CELL_PX / 2, CELL_PX / 2.5, 0, 2 * Math.PI);
    ctx.fill();
    if (state.map.agentHeading !== null) {
      const rad = (state.map.agentHeading * Math.PI) / 180;
      ctx.strokeStyle = "#fff";
      ctx.beginPath();
      ctx.moveTo(c * CELL_PX + CELL_PX / 2, r * CELL_PX + CELL_PX / 2);
      ctx.lineTo(
        c * CELL_PX + CELL_PX / 2 + (Math.cos(rad) * CELL_PX) / 2,
        r * CELL_PX + CELL_PX / 2 - (Math.sin(rad) * CELL_PX) / 2,
      );
      ctx.stroke();
    }
  }
}

export function renderTargetImage(el: HTMLElement, imageRef: string): void {
  // image handles are opaque references, not fetchable URLs in stub mode;
  // show the handle so the human knows which reference card they hold
  el.textContent = `target reference: ${imageRef}`;
}
