"""Corpus factory: rewrite raw persona-chat records into step-by-step seeds,
filter them by turn and message counts, cluster topics in two prompt-driven
stages, and assign every seed one final topic.

A "turn" here is a maximal run of consecutive same-role messages, the same
notion the run-length metrics use. Batch boundaries follow corpus order so
reruns are reproducible, and every skipped record lands in a JSONL audit
log as (id, stage, reason).
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backend import ask
from .errors import (
    BackendError,
    CardinalityError,
    CoverageError,
    JsonParseError,
    SchemaError,
)
from .metrics import runs
from .prompts import load_rewrite_examples, render_template
from .transcripts import append_jsonl, seed_from_dict
from .types import SeedSample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterThresholds:
    min_turns: int = 6
    max_turns: int = 8
    min_messages: int = 25
    max_messages: int = 40

    def __post_init__(self):
        if self.min_turns > self.max_turns:
            raise ValueError("min_turns must not exceed max_turns")
        if self.min_messages > self.max_messages:
            raise ValueError("min_messages must not exceed max_messages")


@dataclass
class TopicTree:
    batch_subtopics: list[list[str]] = field(default_factory=list)
    merged_topics: list[str] = field(default_factory=list)
    assignment: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "batch_subtopics": self.batch_subtopics,
            "merged_topics": self.merged_topics,
            "assignment": {str(k): v for k, v in self.assignment.items()},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TopicTree":
        return cls(
            batch_subtopics=[list(batch) for batch in obj.get("batch_subtopics", [])],
            merged_topics=list(obj.get("merged_topics", [])),
            assignment={int(k): v for k, v in obj.get("assignment", {}).items()},
        )


@dataclass
class SkipEntry:
    record_id: str
    stage: str
    reason: str

    def to_dict(self) -> dict:
        return {"id": self.record_id, "stage": self.stage, "reason": self.reason}


def _strip_code_fence(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[a-zA-Z]*\n?", "", text)
        text = re.sub(r"\n?```$", "", text)
    return text.strip()


def _parse_json(text: str):
    try:
        return json.loads(_strip_code_fence(text))
    except json.JSONDecodeError as exc:
        raise JsonParseError(f"model output is not JSON: {exc}")


# --- conversion -------------------------------------------------------------

def render_raw_record(record: dict) -> tuple[str, str]:
    """Format the personas and conversation blocks of a raw record."""
    personas = record.get("personas")
    if not isinstance(personas, list) or len(personas) != 2:
        raise SchemaError("$.personas", "expected two persona lists")
    persona_lines = []
    for i, persona in enumerate(personas):
        if isinstance(persona, list):
            persona = " ".join(str(p).strip() for p in persona)
        persona_lines.append(f"Persona {i + 1}: {persona}")
    conversation = record.get("conversation")
    if not isinstance(conversation, list) or not conversation:
        raise SchemaError("$.conversation", "expected a non-empty message list")
    convo_lines = []
    for i, entry in enumerate(conversation):
        if isinstance(entry, str):
            speaker = "A" if i % 2 == 0 else "B"
            text = entry
        elif isinstance(entry, dict):
            speaker = str(entry.get("speaker", "A"))
            text = str(entry.get("text", ""))
        else:
            raise SchemaError(f"$.conversation[{i}]", "expected string or object")
        convo_lines.append(f"{speaker}: {text}")
    return "\n".join(persona_lines), "Conversation:\n" + "\n".join(convo_lines)


def _normalize_characters(obj: dict) -> dict:
    """Accept the rewriting prompt's name1/name2 keys alongside plain name."""
    characters = obj.get("characters")
    if not isinstance(characters, list):
        return obj
    fixed = []
    for entry in characters:
        if isinstance(entry, dict) and "name" not in entry:
            for alias in ("name1", "name2"):
                if alias in entry:
                    entry = {**entry, "name": entry[alias]}
                    entry.pop(alias, None)
                    break
        fixed.append(entry)
    return {**obj, "characters": fixed}


def convert(record: dict, backend, retry_budget: int = 1) -> SeedSample:
    """Rewrite one raw record into a SeedSample via the in-context prompt.

    JSON and schema failures are retried with fresh backend calls up to
    retry_budget times, then the last error propagates (the corpus driver
    turns that into a skip-log entry).
    """
    personas_block, conversation_block = render_raw_record(record)
    examples = load_rewrite_examples()
    prompt = render_template(
        "rewrite_seed",
        EXAMPLE1=examples[0],
        EXAMPLE2=examples[1],
        EXAMPLE3=examples[2],
        EXAMPLE4=examples[3],
        EXAMPLE5=examples[4],
        PERSONAS=personas_block,
        CONVERSATION=conversation_block,
    )
    last_error: Exception | None = None
    for _ in range(retry_budget + 1):
        reply = ask(backend, prompt)
        try:
            obj = _parse_json(reply.text)
            if not isinstance(obj, dict):
                raise SchemaError("$", "expected a JSON object")
            return seed_from_dict(_normalize_characters(obj))
        except (JsonParseError, SchemaError) as exc:
            last_error = exc
    assert last_error is not None
    raise last_error


def convert_corpus(records: list[dict], backend_factory, retry_budget: int = 1,
                   parallelism: int = 1,
                   skip_log_path=None) -> tuple[list[SeedSample], list[SkipEntry]]:
    """Convert every record, skip-logging the ones that fail after retries.

    backend_factory() must return a backend usable by one worker; with
    parallelism 1 a plain backend instance can be passed via a lambda.
    """
    skips: list[SkipEntry] = []
    results: list[SeedSample | None] = [None] * len(records)

    def work(index: int):
        backend = backend_factory()
        record = records[index]
        record_id = str(record.get("id", index))
        try:
            results[index] = convert(record, backend, retry_budget)
        except (JsonParseError, SchemaError, BackendError) as exc:
            skips.append(SkipEntry(record_id, "convert", str(exc)))

    if parallelism <= 1:
        for i in range(len(records)):
            work(i)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(work, range(len(records))))

    if skip_log_path is not None:
        for entry in skips:
            append_jsonl(entry.to_dict(), skip_log_path)
    return [seed for seed in results if seed is not None], skips


# --- filtering --------------------------------------------------------------

def turn_count(seed: SeedSample) -> int:
    return len(runs(list(seed.recent_conversations)))


def message_count(seed: SeedSample) -> int:
    return len(seed.recent_conversations)


@dataclass
class FilterReport:
    total: int
    turn_pass: int
    both_pass: int


def filter_with_report(seeds: list[SeedSample],
                       th: FilterThresholds = FilterThresholds()
                       ) -> tuple[list[SeedSample], FilterReport]:
    kept = []
    turn_pass = 0
    for seed in seeds:
        turns_ok = th.min_turns <= turn_count(seed) <= th.max_turns
        if turns_ok:
            turn_pass += 1
        if turns_ok and th.min_messages <= message_count(seed) <= th.max_messages:
            kept.append(seed)
    report = FilterReport(total=len(seeds), turn_pass=turn_pass, both_pass=len(kept))
    logger.info("filter: %d total, %d pass turns, %d pass both",
                report.total, report.turn_pass, report.both_pass)
    return kept, report


def filter_corpus(seeds: list[SeedSample],
                  th: FilterThresholds = FilterThresholds()) -> list[SeedSample]:
    kept, _ = filter_with_report(seeds, th)
    return kept


# --- topic descriptors ------------------------------------------------------

def _truncate_words(text: str, max_words: int = 10) -> str:
    words = text.split()
    return " ".join(words[:max_words])


def summarize_topics(seeds: list[SeedSample], backend,
                     ) -> tuple[list[str | None], list[SkipEntry]]:
    """One short descriptor per seed; existing topics pass through untouched."""
    descriptors: list[str | None] = []
    skips: list[SkipEntry] = []
    for index, seed in enumerate(seeds):
        if seed.topic.strip():
            descriptors.append(seed.topic)
            continue
        dialogue = "\n".join(
            f"{m.role}: {m.content}" for m in seed.recent_conversations
        )
        try:
            reply = ask(backend, f"Summarize the main topic of this conversation in 10 words or less. Output only the topic.\n\n{dialogue}")
        except BackendError as exc:
            descriptors.append(None)
            skips.append(SkipEntry(str(index), "summarize", str(exc)))
            continue
        descriptors.append(_truncate_words(reply.text.strip()))
    return descriptors, skips


# --- two-level clustering ---------------------------------------------------

def _parse_name_array(text: str) -> list[str]:
    obj = _parse_json(text)
    if not isinstance(obj, list) or not all(isinstance(x, str) for x in obj):
        raise CardinalityError("expected a JSON array of strings")
    return obj


def cluster_two_level(descriptors: list[str], backend, batch_size: int = 600,
                      subtopics_per_batch: int = 60, final_k: int = 60,
                      retry_budget: int = 1) -> TopicTree:
    """Stage 1 maps each batch of descriptors to subtopic names; stage 2
    consolidates all subtopics into exactly final_k topics.

    Full batches must yield exactly subtopics_per_batch names; a trailing
    partial batch may yield fewer. Wrong cardinalities are retried, then
    fail the stage.
    """
    if not descriptors:
        raise ValueError("cluster_two_level requires descriptors")
    batches = [descriptors[i:i + batch_size] for i in range(0, len(descriptors), batch_size)]
    tree = TopicTree()

    for batch_index, batch in enumerate(batches):
        full = len(batch) == batch_size
        prompt = render_template(
            "cluster_stage1",
            N_TOPICS=str(len(batch)),
            K=str(subtopics_per_batch),
            TOPICS_JSON=json.dumps(batch, ensure_ascii=False, indent=2),
        )
        names = _call_for_names(
            backend, prompt, retry_budget,
            check=lambda ns: (len(ns) == subtopics_per_batch) if full
            else (0 < len(ns) <= subtopics_per_batch),
            what=f"stage-1 batch {batch_index}",
            expected=f"{subtopics_per_batch}" if full else f"1..{subtopics_per_batch}",
        )
        tree.batch_subtopics.append(names)

    subtopics = [name for batch in tree.batch_subtopics for name in batch]
    prompt = render_template(
        "cluster_stage2",
        N_TOPICS=str(len(subtopics)),
        K=str(final_k),
        TOPICS_JSON=json.dumps(subtopics, ensure_ascii=False, indent=2),
    )
    merged = _call_for_names(
        backend, prompt, retry_budget,
        check=lambda ns: len(ns) == final_k and len(set(ns)) == final_k,
        what="stage-2 merge",
        expected=f"exactly {final_k} unique",
    )
    tree.merged_topics = merged
    return tree


def _call_for_names(backend, prompt: str, retry_budget: int, check, what: str,
                    expected: str) -> list[str]:
    last_error: Exception | None = None
    for _ in range(retry_budget + 1):
        reply = ask(backend, prompt)
        try:
            names = _parse_name_array(reply.text)
        except (JsonParseError, CardinalityError) as exc:
            last_error = exc
            continue
        if check(names):
            return names
        last_error = CardinalityError(
            f"{what}: got {len(names)} names, expected {expected}"
        )
    assert last_error is not None
    raise last_error


# --- assignment -------------------------------------------------------------

def assign_topics(seeds: list[SeedSample], tree: TopicTree, backend,
                  batch_size: int = 50, retry_budget: int = 1) -> TopicTree:
    """Assign every seed exactly one merged topic, validating full coverage.

    Seeds are identified by their corpus index. assigned_topic is written
    into each seed and the mapping recorded in tree.assignment.
    """
    if not tree.merged_topics:
        raise ValueError("assign_topics requires merged topics")
    topics_list = "\n".join(f"- {t}" for t in tree.merged_topics)
    allowed = set(tree.merged_topics)

    for start in range(0, len(seeds), batch_size):
        batch = list(enumerate(seeds))[start:start + batch_size]
        expected_ids = {index for index, _ in batch}
        payload = [
            {"id": index, "topic": seed.topic or "(no descriptor)"}
            for index, seed in batch
        ]
        prompt = render_template(
            "assign_topic",
            TOPICS_LIST=topics_list,
            TOPICS_JSON=json.dumps(payload, ensure_ascii=False, indent=2),
        )
        mapping = _call_for_assignment(backend, prompt, expected_ids, allowed,
                                       retry_budget)
        for index, topic in mapping.items():
            seeds[index].assigned_topic = topic
            tree.assignment[index] = topic
    return tree


def _call_for_assignment(backend, prompt: str, expected_ids: set[int],
                         allowed: set[str], retry_budget: int) -> dict[int, str]:
    last_error: Exception | None = None
    for _ in range(retry_budget + 1):
        reply = ask(backend, prompt)
        try:
            obj = _parse_json(reply.text)
            return _validate_assignment(obj, expected_ids, allowed)
        except (JsonParseError, CoverageError) as exc:
            last_error = exc
    assert last_error is not None
    raise last_error


def _validate_assignment(obj, expected_ids: set[int],
                         allowed: set[str]) -> dict[int, str]:
    if not isinstance(obj, dict):
        raise CoverageError("assignment must be a JSON object")
    seen: dict[int, str] = {}
    for topic, ids in obj.items():
        if topic not in allowed:
            raise CoverageError(f"unknown topic {topic!r}")
        if not isinstance(ids, list):
            raise CoverageError(f"ids for {topic!r} must be an array")
        for raw in ids:
            if isinstance(raw, bool) or not isinstance(raw, int):
                raise CoverageError(f"non-integer id {raw!r}")
            if raw in seen:
                raise CoverageError(f"id {raw} assigned twice")
            seen[raw] = topic
    missing = expected_ids - set(seen)
    extra = set(seen) - expected_ids
    if missing:
        raise CoverageError(f"ids missing from assignment: {sorted(missing)}")
    if extra:
        raise CoverageError(f"unexpected ids in assignment: {sorted(extra)}")
    return seen


# --- reporting --------------------------------------------------------------

def top_topics_report(tree: TopicTree, top_k: int | None = None
                      ) -> list[tuple[str, int]]:
    """Topics ranked by assigned-seed count, ties broken lexicographically."""
    counts: dict[str, int] = {}
    for topic in tree.assignment.values():
        counts[topic] = counts.get(topic, 0) + 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:top_k] if top_k is not None else ranked
