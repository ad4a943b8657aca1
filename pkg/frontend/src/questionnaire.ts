/**
 * Role-identification questionnaire flow.
 *
 * A questionnaire holds exactly two anonymized dialogues; the rater answers
 * role1 / role2 / unclear for each. Submission is blocked until both are
 * answered, sent at most once, and a failed submit keeps the answers so the
 * rater can retry.
 */

import type {
  QuestionnaireData,
  QuestionnairePayload,
  RoleAnswer,
} from "./types.js";

export const ANSWER_OPTIONS: { value: RoleAnswer; label: string }[] = [
  { value: "role1", label: "Role 1 is the AI" },
  { value: "role2", label: "Role 2 is the AI" },
  { value: "unclear", label: "Unclear" },
];

export function dialogueIds(data: QuestionnaireData): string[] {
  return data.dialogues.map((d) => d.transcript_id);
}

export function missingAnswers(
  ids: string[],
  answers: Partial<Record<string, RoleAnswer>>,
): string[] {
  return ids.filter((id) => answers[id] === undefined);
}

/** Build the submission payload; the contract is exactly two answers. */
export function buildSubmission(
  data: QuestionnaireData,
  raterId: string,
  answers: Partial<Record<string, RoleAnswer>>,
): QuestionnairePayload {
  const ids = dialogueIds(data);
  if (ids.length !== 2) {
    throw new Error(`questionnaire must hold exactly two dialogues, got ${ids.length}`);
  }
  const missing = missingAnswers(ids, answers);
  if (missing.length > 0) {
    throw new Error(`unanswered dialogues: ${missing.join(", ")}`);
  }
  const payload: QuestionnairePayload = {
    questionnaire_id: data.questionnaire_id,
    rater_id: raterId,
    answers: {},
  };
  for (const id of ids) {
    payload.answers[id] = answers[id] as RoleAnswer;
  }
  if (Object.keys(payload.answers).length !== 2) {
    throw new Error("submission payload must contain exactly two answers");
  }
  return payload;
}

export type SubmitResult =
  | { ok: true }
  | { ok: false; error: string; retryable: boolean };

export class QuestionnaireFlow {
  private answers: Partial<Record<string, RoleAnswer>> = {};
  private submittedFlag = false;
  private inFlight = false;

  constructor(
    private readonly data: QuestionnaireData,
    private readonly raterId: string,
    private readonly submitFn: (payload: QuestionnairePayload) => Promise<unknown>,
  ) {}

  get submitted(): boolean {
    return this.submittedFlag;
  }

  get currentAnswers(): Partial<Record<string, RoleAnswer>> {
    return { ...this.answers };
  }

  setAnswer(transcriptId: string, answer: RoleAnswer): void {
    if (this.submittedFlag) {
      return; // inputs are frozen after a successful submit
    }
    if (!dialogueIds(this.data).includes(transcriptId)) {
      throw new Error(`unknown dialogue ${transcriptId}`);
    }
    this.answers[transcriptId] = answer;
  }

  /** Which dialogues still need an answer before submit unblocks. */
  missing(): string[] {
    return missingAnswers(dialogueIds(this.data), this.answers);
  }

  async submit(): Promise<SubmitResult> {
    if (this.submittedFlag) {
      return { ok: false, error: "already submitted", retryable: false };
    }
    if (this.inFlight) {
      return { ok: false, error: "submission in progress", retryable: false };
    }
    const missing = this.missing();
    if (missing.length > 0) {
      return {
        ok: false,
        error: `answer both dialogues first (${missing.length} left)`,
        retryable: false,
      };
    }
    const payload = buildSubmission(this.data, this.raterId, this.answers);
    this.inFlight = true;
    try {
      await this.submitFn(payload);
    } catch (err) {
      // answers are kept; the rater can retry
      return { ok: false, error: String(err), retryable: true };
    } finally {
      this.inFlight = false;
    }
    this.submittedFlag = true;
    return { ok: true };
  }
}
