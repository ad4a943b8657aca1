/**
 * Questionnaire page bootstrap: fetch two anonymized dialogues, collect one
 * answer per dialogue, submit exactly once.
 *
 * URL parameters: ?api=<base>&rater=<id>
 */

import { StepchatApi } from "./api.js";
import { ANSWER_OPTIONS, QuestionnaireFlow } from "./questionnaire.js";
import type { QuestionnaireData, RoleAnswer } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderDialogues(data: QuestionnaireData, flow: QuestionnaireFlow): void {
  const container = el<HTMLElement>("dialogues");
  container.textContent = "";
  data.dialogues.forEach((dialogue, index) => {
    const section = document.createElement("section");
    section.className = "dialogue";
    const heading = document.createElement("h2");
    heading.textContent = `Dialogue ${index + 1}`;
    section.appendChild(heading);

    const log = document.createElement("div");
    log.className = "dialogue-log";
    for (const message of dialogue.messages) {
      const line = document.createElement("div");
      line.className = message.role === "Role 1" ? "line role1" : "line role2";
      line.textContent = `${message.role}: ${message.content}`;
      log.appendChild(line);
    }
    section.appendChild(log);

    const choices = document.createElement("fieldset");
    const legend = document.createElement("legend");
    legend.textContent = "Which role is the AI?";
    choices.appendChild(legend);
    for (const option of ANSWER_OPTIONS) {
      const label = document.createElement("label");
      const radio = document.createElement("input");
      radio.type = "radio";
      radio.name = `answer-${dialogue.transcript_id}`;
      radio.value = option.value;
      radio.addEventListener("change", () => {
        flow.setAnswer(dialogue.transcript_id, option.value as RoleAnswer);
        el<HTMLElement>("validation-line").textContent = "";
      });
      label.append(radio, document.createTextNode(` ${option.label}`));
      choices.appendChild(label);
    }
    section.appendChild(choices);
    container.appendChild(section);
  });
}

async function bootstrap(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const api = new StepchatApi(params.get("api") ?? "");
  const raterId = params.get("rater") ?? `rater-${Math.random().toString(36).slice(2, 8)}`;

  const data = await api.newQuestionnaire(raterId);
  const flow = new QuestionnaireFlow(data, raterId, (payload) =>
    api.submitQuestionnaire(payload),
  );
  renderDialogues(data, flow);

  const submitButton = el<HTMLButtonElement>("submit-button");
  submitButton.addEventListener("click", async () => {
    const result = await flow.submit();
    const validation = el<HTMLElement>("validation-line");
    if (result.ok) {
      validation.textContent = "";
      el<HTMLElement>("confirmation").classList.add("visible");
      submitButton.disabled = true;
      for (const radio of document.querySelectorAll<HTMLInputElement>("input[type=radio]")) {
        radio.disabled = true; // inputs frozen after a successful submit
      }
    } else {
      validation.textContent = result.retryable
        ? `${result.error} — your answers are kept, press submit to retry`
        : result.error;
    }
  });
}

bootstrap().catch((err) => {
  const status = document.getElementById("validation-line");
  if (status) status.textContent = String(err);
});
