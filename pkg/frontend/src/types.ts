/** Shared types for the stepchat browser client. */

export type SessionEventType = "message" | "typing_started" | "waiting" | "closed";

/** One event from GET /sessions/{id}/events (SSE data payload). */
export interface SessionEvent {
  seq: number;
  type: SessionEventType;
  /** server wall time of the event */
  t: number;
  role?: string;
  content?: string;
  /** virtual dialogue timestamp of a message */
  timestamp?: number;
  origin?: string;
  /** present on typing_started: visible typing phase length in seconds */
  typing_s?: number;
  /** present on agent message events: the decision record that produced it */
  step_seq?: number;
}

export type AgentStatus = "idle" | "thinking" | "typing" | "waiting";

export interface ChatBubble {
  seq: number;
  role: string;
  content: string;
  timestamp: number;
  fromAgent: boolean;
}

/**
 * The chat view model. Status follows the event stream exactly: "typing"
 * holds only between a typing_started event and the message it announces;
 * an explicit wait renders as silent presence ("waiting" shows no
 * indicator).
 */
export interface UiSessionView {
  messages: ChatBubble[];
  status: AgentStatus;
  lastSeq: number;
  closed: boolean;
  inputEnabled: boolean;
  agentName: string | null;
}

export interface SessionInfo {
  id: string;
  system: string;
  status: string;
  topic: string;
  human_name: string;
  agent_name: string;
}

export type RoleAnswer = "role1" | "role2" | "unclear";

export interface QuestionnaireDialogue {
  transcript_id: string;
  messages: { role: string; content: string; timestamp: number }[];
}

export interface QuestionnaireData {
  questionnaire_id: string;
  dialogues: QuestionnaireDialogue[];
}

export interface QuestionnairePayload {
  questionnaire_id: string;
  rater_id: string;
  answers: Record<string, RoleAnswer>;
}
