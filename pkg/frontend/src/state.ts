// Pure session-state reducer: UI state is a function of the ordered event
// feed plus local pending input. Replaying a feed (or overlapping replays
// after a reconnect) reproduces the same state because sequence numbers
// below the cursor are ignored.

import type {
  ChatTurn,
  EpisodeDetail,
  QuestionPayload,
  ResultPayload,
  TranscriptEvent,
  UiSessionState,
  WireMessage,
} from "./types";

export function initialState(episode?: EpisodeDetail): UiSessionState {
  return {
    connection: "idle",
    chat: [],
    pendingQuestionId: null,
    map: {
      grid: episode ? episode.grid : [],
      agentCell: episode ? episode.start.cell : null,
      agentHeading: episode ? episode.start.heading : null,
      trail: episode ? [episode.start.cell] : [],
      markers: [],
    },
    result: null,
    errors: [],
    lastSeq: 0,
  };
}

export function applyMessage(state: UiSessionState, msg: WireMessage): UiSessionState {
  const seq = typeof msg.payload.seq === "number" ? msg.payload.seq : null;
  if (seq !== null && seq <= state.lastSeq) {
    return state; // replayed message, already folded in
  }
  switch (msg.type) {
    case "question": {
      const p = msg.payload as unknown as QuestionPayload;
      return {
        ...state,
        lastSeq: p.seq,
        pendingQuestionId: p.question_id,
        chat: [
          ...state.chat,
          { kind: "question", text: p.text, seq: p.seq, questionId: p.question_id } as ChatTurn,
        ],
      };
    }
    case "event": {
      const event = msg.payload.event as TranscriptEvent;
      return applyTranscriptEvent({ ...state, lastSeq: seq ?? state.lastSeq }, event, seq ?? 0);
    }
    case "result": {
      const p = msg.payload as unknown as ResultPayload;
      return { ...state, lastSeq: p.seq, result: p, pendingQuestionId: null };
    }
    case "answer": {
      // ack for our own submission: input stays disabled until next question
      if (msg.payload.accepted === true) {
        return { ...state, pendingQuestionId: null };
      }
      return state;
    }
    case "error": {
      const message = String(msg.payload.message ?? "unknown error");
      return { ...state, errors: [...state.errors, message] };
    }
    default:
      return state;
  }
}

function applyTranscriptEvent(
  state: UiSessionState,
  event: TranscriptEvent,
  seq: number,
): UiSessionState {
  switch (event.type) {
    case "action": {
      const cell = event.cell as [number, number] | undefined;
      if (!cell) return state;
      const moved =
        !state.map.agentCell ||
        cell[0] !== state.map.agentCell[0] ||
        cell[1] !== state.map.agentCell[1];
      return {
        ...state,
        map: {
          ...state.map,
          agentCell: cell,
          agentHeading: (event.heading as number) ?? state.map.agentHeading,
          trail: moved ? [...state.map.trail, cell] : state.map.trail,
        },
      };
    }
    case "detection": {
      return {
        ...state,
        map: {
          ...state.map,
          markers: [
            ...state.map.markers,
            { cell: event.cell as [number, number], instanceId: String(event.instance_id) },
          ],
        },
      };
    }
    case "answer": {
      // the user's own reply, echoed through the ordered feed
      return {
        ...state,
        chat: [...state.chat, { kind: "answer", text: String(event.text), seq }],
      };
    }
    case "trigger": {
      const text =
        event.kind === "Stop"
          ? `agent stops (score ${event.score})`
          : `agent keeps exploring (${event.kind}, score ${event.score ?? "n/a"})`;
      return { ...state, chat: [...state.chat, { kind: "status", text, seq }] };
    }
    default:
      return state;
  }
}

export function answerInputEnabled(state: UiSessionState): boolean {
  return state.pendingQuestionId !== null && state.result === null;
}
