// Entry point: pick the first episode, open a session, wire the socket to
// the renderers, and forward the form input as answer messages.

import { renderChat, renderInput, renderMap, renderStatus, renderTargetImage } from "./render";
import { SessionClient } from "./socket";
import type { EpisodeDetail } from "./types";

const API = location.origin.replace(/^ws/, "http");
const WS_URL = API.replace(/^http/, "ws") + "/ws";

async function boot(): Promise<void> {
  const chatEl = document.getElementById("chat") as HTMLElement;
  const statusEl = document.getElementById("status") as HTMLElement;
  const targetEl = document.getElementById("target") as HTMLElement;
  const mapEl = document.getElementById("map") as HTMLCanvasElement;
  const inputEl = document.getElementById("answer") as HTMLInputElement;
  const sendEl = document.getElementById("send") as HTMLButtonElement;

  const episodes = (await (await fetch(`${API}/episodes`)).json()).episodes as Array<{ id: string }>;
  if (!episodes.length) {
    statusEl.textContent = "no episodes on the server";
    return;
  }
  const episode = (await (await fetch(`${API}/episodes/${episodes[0].id}`)).json()) as EpisodeDetail;
  renderTargetImage(targetEl, episode.target_image_ref);

  const session = await (
    await fetch(`${API}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ episode_id: episode.id }),
    })
  ).json();

  const client = new SessionClient({
    url: WS_URL,
    sessionId: session.session_id,
    episode,
    onChange: (state) => {
      renderChat(chatEl, state);
      renderInput(inputEl, sendEl, state);
      renderStatus(statusEl, state);
      renderMap(mapEl, state);
    },
  });
  client.connect();

  const submit = () => {
    const text = inputEl.value.trim();
    if (client.submitAnswer(text)) {
      inputEl.value = "";
      inputEl.disabled = true;
      sendEl.disabled = true;
    }
  };
  sendEl.addEventListener("click", submit);
  inputEl.addEventListener("keydown", (e) => {
    if (e.key === "Enter") submit();
  });
}

boot().catch((err) => {
  const statusEl = document.getElementById("status");
  if (statusEl) statusEl.textContent = `failed to start: ${err}`;
});
