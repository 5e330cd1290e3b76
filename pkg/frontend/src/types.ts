// Wire protocol of the session service (v1), mirrored from the server schema.

export type WireType = "start" | "event" | "question" | "answer" | "result" | "error";

export interface WireMessage {
  v: number;
  type: WireType;
  session_id: string;
  payload: Record<string, unknown> & { seq?: number };
}

export interface QuestionPayload {
  seq: number;
  question_id: string;
  text: string;
}

export interface ResultPayload {
  seq: number;
  outcome: string;
  success: boolean;
  path_length_m: number;
  questions_asked: number;
  actions_taken: number;
  abort_reason: string | null;
}

// Engine transcript events republished inside "event" messages.
export interface TranscriptEvent {
  type: "action" | "detection" | "model_call" | "question" | "answer" | "trigger" | "result" | "error";
  [key: string]: unknown;
}

export interface EpisodeDetail {
  id: string;
  category: string;
  grid: number[][];
  start: { cell: [number, number]; heading: number };
  instances: Array<{
    id: string;
    category: string;
    cell: [number, number];
    attributes: Record<string, string>;
    image_ref: string;
    is_target: boolean;
  }>;
  target_image_ref: string;
}

export interface ChatTurn {
  kind: "question" | "answer" | "status";
  text: string;
  seq: number;
  questionId?: string;
}

export interface MapModel {
  grid: number[][];
  agentCell: [number, number] | null;
  agentHeading: number | null;
  trail: Array<[number, number]>;
  markers: Array<{ cell: [number, number]; instanceId: string }>;
}

export type ConnectionStatus = "idle" | "connecting" | "open" | "reconnecting" | "closed";

export interface UiSessionState {
  connection: ConnectionStatus;
  chat: ChatTurn[];
  pendingQuestionId: string | null;
  map: MapModel;
  result: ResultPayload | null;
  errors: string[];
  lastSeq: number;
}
