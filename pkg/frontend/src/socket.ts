// Session socket: subscribes from a cursor, reduces incoming messages into
// the UI state, reconnects with the last seen sequence number so nothing is
// lost or duplicated, and guards answer submission on the pending question.

import { applyMessage, initialState } from "./state";
import type { EpisodeDetail, UiSessionState, WireMessage } from "./types";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionClientOptions {
  url: string;
  sessionId: string;
  episode?: EpisodeDetail;
  factory?: SocketFactory;
  reconnectDelayMs?: number;
  onChange?: (state: UiSessionState) => void;
  scheduler?: (fn: () => void, ms: number) => void;
}

export class SessionClient {
  state: UiSessionState;
  private socket: SocketLike | null = null;
  private readonly opts: Required<Pick<SessionClientOptions, "url" | "sessionId">> &
    SessionClientOptions;
  private stopped = false;

  constructor(opts: SessionClientOptions) {
    this.opts = opts as SessionClient["opts"];
    this.state = initialState(opts.episode);
  }

  connect(): void {
    const factory: SocketFactory =
      this.opts.factory ?? ((url) => new WebSocket(url) as unknown as SocketLike);
    this.setState({
      ...this.state,
      connection: this.state.connection === "idle" ? "connecting" : "reconnecting",
    });
    const socket = factory(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      this.setState({ ...this.state, connection: "open" });
      socket.send(
        JSON.stringify({
          v: 1,
          type: "start",
          session_id: this.opts.sessionId,
          payload: { cursor: this.state.lastSeq },
        }),
      );
    };
    socket.onmessage = (event) => {
      const msg = JSON.parse(event.data) as WireMessage;
      this.setState(applyMessage(this.state, msg));
    };
    socket.onclose = () => {
      if (this.stopped || this.state.result !== null) {
        this.setState({ ...this.state, connection: "closed" });
        return;
      }
      this.setState({ ...this.state, connection: "reconnecting" });
      const schedule = this.opts.scheduler ?? ((fn, ms) => setTimeout(fn, ms));
      schedule(() => {
        if (!this.stopped) this.connect();
      }, this.opts.reconnectDelayMs ?? 500);
    };
  }

  submitAnswer(text: string): boolean {
    if (!this.socket || this.state.pendingQuestionId === null || text.length === 0) {
      return false;
    }
    this.socket.send(
      JSON.stringify({
        v: 1,
        type: "answer",
        session_id: this.opts.sessionId,
        payload: { question_id: this.state.pendingQuestionId, text },
      }),
    );
    return true;
  }

  close(): void {
    this.stopped = true;
    this.socket?.close();
  }

  private setState(next: UiSessionState): void {
    this.state = next;
    this.opts.onChange?.(next);
  }
}
