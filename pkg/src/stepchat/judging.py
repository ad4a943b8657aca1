"""LLM-judge harnesses: dialogue-experience scoring and role identification.

Experience scoring asks each judge for seven 0-100 dimension scores per
transcript; the presentation order of transcripts is shuffled per judge
(seeded) to mitigate position bias, and the final number is the mean over
judges, then over transcripts. Role identification anonymizes speakers to
"Role 1"/"Role 2" with a seeded coin flip, asks the judge to name the AI,
and tallies correct / error / unclear.

Raw per-call records are kept (and optionally persisted as JSONL) so that
aggregate numbers can always be re-derived.
"""

from __future__ import annotations

import json
import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backend import ask
from .errors import AnswerParseError, ScoreParseError
from .metrics import RoleIdTally
from .prompts import render_template
from .transcripts import append_jsonl
from .types import Message, Transcript

logger = logging.getLogger(__name__)

DIMENSIONS = (
    "interesting",
    "informative",
    "natural",
    "coherent",
    "engaging",
    "on_topic",
    "on_persona",
)

ANSWER_RE = re.compile(r"<answer>\s*([ABC])\b.*?</answer>", re.DOTALL | re.IGNORECASE)


def render_dialogue(messages: list[Message], rename: dict[str, str] | None = None) -> str:
    names = rename or {}
    return "\n".join(f"{names.get(m.role, m.role)}: {m.content}" for m in messages)


def _strip_code_fence(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-zA-Z]*\n?", "", text)
        text = re.sub(r"\n?```$", "", text)
    return text.strip()


def parse_scores(text: str) -> dict[str, float]:
    """Extract the seven dimension scores; anything invalid raises ScoreParseError."""
    try:
        payload = json.loads(_strip_code_fence(text))
    except json.JSONDecodeError as exc:
        raise ScoreParseError(f"judge reply is not JSON: {exc}")
    if not isinstance(payload, dict):
        raise ScoreParseError("judge reply must be a JSON object")
    scores = {}
    for dim in DIMENSIONS:
        if dim not in payload:
            raise ScoreParseError(f"missing dimension {dim!r}")
        value = payload[dim]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScoreParseError(f"dimension {dim!r} is not a number")
        if not 0 <= value <= 100:
            raise ScoreParseError(f"dimension {dim!r} out of range: {value}")
        scores[dim] = float(value)
    return scores


@dataclass
class ExperienceScore:
    """One judge's seven-dimension scores for one transcript."""

    judge_id: str
    transcript_index: int
    scores: dict[str, float]


@dataclass
class ExperienceReport:
    per_transcript: list[dict[str, float]]
    corpus_means: dict[str, float]
    average: float
    records: list[ExperienceScore] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)


def judge_experience(transcripts: list[Transcript], judges: list, rng: random.Random,
                     retry_budget: int = 1, records_path=None,
                     parallelism: int = 1, include_seed: bool = False) -> ExperienceReport:
    """Score every transcript with every judge and aggregate.

    Each judge sees the transcripts in its own shuffled order. A judge call
    whose reply cannot be parsed is retried, then skipped and recorded; the
    per-transcript mean is taken over the judges that did score it.
    """
    if not judges:
        raise ValueError("judge_experience requires at least one judge")
    judge_seeds = [rng.getrandbits(32) for _ in judges]

    def run_judge(judge_index: int) -> tuple[list[ExperienceScore], list[dict]]:
        judge = judges[judge_index]
        judge_id = getattr(judge, "model_id", f"judge-{judge_index}")
        order = list(range(len(transcripts)))
        random.Random(judge_seeds[judge_index]).shuffle(order)
        records: list[ExperienceScore] = []
        skipped: list[dict] = []
        for idx in order:
            transcript = transcripts[idx]
            messages = transcript.messages if include_seed else transcript.new_messages
            prompt = render_template(
                "judge_experience",
                DIALOGUE=render_dialogue(messages),
                TOPIC=transcript.seed.topic,
            )
            scores = None
            for _ in range(retry_budget + 1):
                reply = ask(judge, prompt)
                try:
                    scores = parse_scores(reply.text)
                    break
                except ScoreParseError as exc:
                    last = str(exc)
            if scores is None:
                skipped.append({"judge": judge_id, "transcript": idx, "reason": last})
                continue
            records.append(ExperienceScore(judge_id=judge_id, transcript_index=idx,
                                           scores=scores))
        return records, skipped

    all_records: list[ExperienceScore] = []
    all_skipped: list[dict] = []
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        for records, skipped in pool.map(run_judge, range(len(judges))):
            all_records.extend(records)
            all_skipped.extend(skipped)

    per_transcript: list[dict[str, float]] = []
    for idx in range(len(transcripts)):
        mine = [r.scores for r in all_records if r.transcript_index == idx]
        if not mine:
            per_transcript.append({})
            continue
        per_transcript.append(
            {dim: sum(s[dim] for s in mine) / len(mine) for dim in DIMENSIONS}
        )
    scored = [s for s in per_transcript if s]
    corpus_means = {
        dim: (sum(s[dim] for s in scored) / len(scored)) if scored else 0.0
        for dim in DIMENSIONS
    }
    average = sum(corpus_means.values()) / len(DIMENSIONS) if scored else 0.0

    if records_path is not None:
        for record in all_records:
            append_jsonl(
                {"judge": record.judge_id, "transcript": record.transcript_index,
                 "scores": record.scores},
                records_path,
            )
        for entry in all_skipped:
            append_jsonl({**entry, "skipped": True}, records_path)

    return ExperienceReport(
        per_transcript=per_transcript,
        corpus_means=corpus_means,
        average=average,
        records=all_records,
        skipped=all_skipped,
    )


def anonymize_roles(messages: list[Message], ai_role: str,
                    rng: random.Random) -> tuple[str, str]:
    """Render the dialogue with Role 1/Role 2 labels, coin-flipping sides.

    Returns (rendered dialogue, the anonymous label of the AI). The ground
    truth itself never changes; only which side is printed first.
    """
    names = sorted({m.role for m in messages})
    if len(names) != 2:
        raise ValueError("role identification needs exactly two speakers")
    if ai_role not in names:
        raise ValueError(f"ai_role {ai_role!r} not among speakers {names}")
    flip = rng.random() < 0.5
    first, second = (names[1], names[0]) if flip else (names[0], names[1])
    rename = {first: "Role 1", second: "Role 2"}
    ai_label = rename[ai_role]
    return render_dialogue(messages, rename), ai_label


def parse_answer(text: str) -> str:
    """Pull A/B/C out of the answer tags; returns 'role1'/'role2'/'unclear'."""
    match = ANSWER_RE.search(text)
    if match is None:
        raise AnswerParseError("no parseable <answer> tag")
    letter = match.group(1).upper()
    return {"A": "role1", "B": "role2", "C": "unclear"}[letter]


@dataclass
class RoleIdResult:
    tally: RoleIdTally
    records: list[dict] = field(default_factory=list)
    excluded: list[dict] = field(default_factory=list)


def judge_role_id(messages: list[Message], ai_role: str, judges: list,
                  rng: random.Random, retry_budget: int = 1,
                  records_path=None) -> RoleIdResult:
    """Ask each judge to identify the AI side of one dialogue.

    Unparseable replies are retried, then excluded from n_total entirely
    (counting them as unclear would inflate the pass rate).
    """
    tally = RoleIdTally()
    records: list[dict] = []
    excluded: list[dict] = []
    for judge_index, judge in enumerate(judges):
        judge_id = getattr(judge, "model_id", f"judge-{judge_index}")
        dialogue, ai_label = anonymize_roles(messages, ai_role, rng)
        prompt = render_template("role_identification", DIALOGUE=dialogue)
        answer = None
        for _ in range(retry_budget + 1):
            reply = ask(judge, prompt)
            try:
                answer = parse_answer(reply.text)
                break
            except AnswerParseError as exc:
                last = str(exc)
        if answer is None:
            excluded.append({"judge": judge_id, "reason": last})
            continue
        if answer == "unclear":
            outcome = "unclear"
        elif answer == ("role1" if ai_label == "Role 1" else "role2"):
            outcome = "correct"
        else:
            outcome = "error"
        tally = tally + RoleIdTally.single(outcome)
        record = {"judge": judge_id, "answer": answer, "ai_label": ai_label,
                  "outcome": outcome}
        records.append(record)
        if records_path is not None:
            append_jsonl(record, records_path)
    return RoleIdResult(tally=tally, records=records, excluded=excluded)
