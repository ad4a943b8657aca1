"""JSON codecs for seeds, transcripts, and JSONL corpora.

One JSON document per .json file; corpora are .jsonl with one document per
line, always UTF-8. Field names follow the canonical seed schema (topic /
characters / recent_conversations) plus the artifact keys messages, steps,
system, rng, and window_trace on transcripts.

Timestamps are stored as non-negative seconds. Readers also accept a few
human date-time spellings ("2024-03-01 10:05", ISO 8601) because converted
corpora sometimes carry them; they are normalized to epoch seconds.
"""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

from .errors import SchemaError
from .types import (
    ORIGIN_SEED,
    AgentStep,
    Message,
    Persona,
    SeedSample,
    StepRecord,
    Transcript,
)

_DATETIME_FORMATS = (
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y/%m/%d %H:%M:%S",
    "%Y/%m/%d %H:%M",
    "%H:%M:%S",
    "%H:%M",
)


def _require(obj: dict, key: str, path: str) -> Any:
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing field")
    return obj[key]


def _require_str(obj: dict, key: str, path: str) -> str:
    value = _require(obj, key, path)
    if not isinstance(value, str):
        raise SchemaError(f"{path}.{key}", f"expected string, got {type(value).__name__}")
    return value


def _require_list(obj: dict, key: str, path: str) -> list:
    value = _require(obj, key, path)
    if not isinstance(value, list):
        raise SchemaError(f"{path}.{key}", f"expected array, got {type(value).__name__}")
    return value


def parse_timestamp(value: Any, path: str) -> float:
    """Normalize a JSON timestamp (number or date-time string) to seconds."""
    if isinstance(value, bool):
        raise SchemaError(path, "expected timestamp, got boolean")
    if isinstance(value, (int, float)):
        ts = float(value)
        if not math.isfinite(ts) or ts < 0:
            raise SchemaError(path, f"timestamp out of range: {value!r}")
        return ts
    if isinstance(value, str):
        text = value.strip()
        try:
            ts = float(text)
        except ValueError:
            pass
        else:
            if not math.isfinite(ts) or ts < 0:
                raise SchemaError(path, f"timestamp out of range: {value!r}")
            return ts
        for fmt in _DATETIME_FORMATS:
            try:
                dt = datetime.strptime(text, fmt)
            except ValueError:
                continue
            if fmt in ("%H:%M:%S", "%H:%M"):
                return float(dt.hour * 3600 + dt.minute * 60 + dt.second)
            return dt.replace(tzinfo=timezone.utc).timestamp()
        try:
            return datetime.fromisoformat(text).replace(tzinfo=timezone.utc).timestamp()
        except ValueError:
            raise SchemaError(path, f"unparseable timestamp {value!r}")
    raise SchemaError(path, f"expected timestamp, got {type(value).__name__}")


def message_to_dict(msg: Message) -> dict:
    return {
        "timestamp": msg.timestamp,
        "role": msg.role,
        "content": msg.content,
        "origin": msg.origin,
    }


def message_from_dict(obj: dict, path: str, default_origin: str = ORIGIN_SEED) -> Message:
    timestamp = parse_timestamp(_require(obj, "timestamp", path), f"{path}.timestamp")
    role = _require_str(obj, "role", path)
    content = _require_str(obj, "content", path)
    origin = obj.get("origin", default_origin)
    try:
        return Message(role=role, content=content, timestamp=timestamp, origin=origin)
    except ValueError as exc:
        raise SchemaError(path, str(exc))


def persona_to_dict(p: Persona) -> dict:
    return {"name": p.name, "personality": p.personality}


def persona_from_dict(obj: dict, path: str) -> Persona:
    name = _require_str(obj, "name", path)
    personality = _require_str(obj, "personality", path)
    try:
        return Persona(name=name, personality=personality)
    except ValueError as exc:
        raise SchemaError(path, str(exc))


def seed_to_dict(seed: SeedSample) -> dict:
    doc = {
        "topic": seed.topic,
        "characters": [persona_to_dict(p) for p in seed.characters],
        "recent_conversations": [
            message_to_dict(m) for m in seed.recent_conversations
        ],
    }
    if seed.assigned_topic is not None:
        doc["assigned_topic"] = seed.assigned_topic
    return doc


def seed_from_dict(obj: dict, path: str = "$") -> SeedSample:
    topic = _require_str(obj, "topic", path)
    characters_raw = _require_list(obj, "characters", path)
    if len(characters_raw) != 2:
        raise SchemaError(f"{path}.characters", "expected exactly 2 characters")
    characters = tuple(
        persona_from_dict(c, f"{path}.characters[{i}]")
        for i, c in enumerate(characters_raw)
    )
    conversations_raw = _require_list(obj, "recent_conversations", path)
    messages = tuple(
        message_from_dict(m, f"{path}.recent_conversations[{i}]")
        for i, m in enumerate(conversations_raw)
    )
    assigned = obj.get("assigned_topic")
    if assigned is not None and not isinstance(assigned, str):
        raise SchemaError(f"{path}.assigned_topic", "expected string")
    try:
        return SeedSample(
            topic=topic,
            characters=characters,
            recent_conversations=messages,
            assigned_topic=assigned,
        )
    except ValueError as exc:
        raise SchemaError(path, str(exc))


def step_to_dict(rec: StepRecord) -> dict:
    return {
        "agent": rec.agent,
        "think": rec.step.think,
        "action": rec.step.action,
        "text": rec.step.text,
        "delay_s": rec.step.delay_s,
    }


def step_from_dict(obj: dict, path: str) -> StepRecord:
    agent = _require_str(obj, "agent", path)
    think = _require_str(obj, "think", path)
    action = _require_str(obj, "action", path)
    text = obj.get("text", "")
    delay_raw = obj.get("delay_s", 0.0)
    if not isinstance(delay_raw, (int, float)) or isinstance(delay_raw, bool):
        raise SchemaError(f"{path}.delay_s", "expected number")
    try:
        step = AgentStep(think=think, action=action, text=text, delay_s=float(delay_raw))
    except ValueError as exc:
        raise SchemaError(path, str(exc))
    return StepRecord(agent=agent, step=step)


def transcript_to_dict(t: Transcript) -> dict:
    doc = seed_to_dict(t.seed)
    doc["messages"] = [message_to_dict(m) for m in t.new_messages]
    doc["steps"] = [step_to_dict(s) for s in t.steps]
    doc["system"] = t.system_label
    if t.rng_algorithm is not None:
        doc["rng"] = {"algorithm": t.rng_algorithm, "seed": t.rng_seed}
    if t.window_trace:
        doc["window_trace"] = t.window_trace
    return doc


def transcript_from_dict(obj: dict, path: str = "$") -> Transcript:
    seed = seed_from_dict(obj, path)
    new_raw = obj.get("messages", [])
    if not isinstance(new_raw, list):
        raise SchemaError(f"{path}.messages", "expected array")
    new_messages = [
        message_from_dict(m, f"{path}.messages[{i}]", default_origin="agent")
        for i, m in enumerate(new_raw)
    ]
    steps_raw = obj.get("steps", [])
    if not isinstance(steps_raw, list):
        raise SchemaError(f"{path}.steps", "expected array")
    steps = [step_from_dict(s, f"{path}.steps[{i}]") for i, s in enumerate(steps_raw)]
    system = obj.get("system", "human-mixed")
    rng = obj.get("rng") or {}
    trace = obj.get("window_trace", [])
    if not isinstance(trace, list):
        raise SchemaError(f"{path}.window_trace", "expected array")
    try:
        return Transcript(
            seed=seed,
            messages=list(seed.recent_conversations) + new_messages,
            steps=steps,
            system_label=system,
            rng_algorithm=rng.get("algorithm"),
            rng_seed=rng.get("seed"),
            window_trace=trace,
        )
    except ValueError as exc:
        raise SchemaError(path, str(exc))


def _dump(doc: dict) -> str:
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def write_transcript(t: Transcript, path: str | Path) -> None:
    Path(path).write_text(_dump(transcript_to_dict(t)), encoding="utf-8")


def read_transcript(path: str | Path) -> Transcript:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}")
    return transcript_from_dict(obj)


def write_seed(seed: SeedSample, path: str | Path) -> None:
    Path(path).write_text(_dump(seed_to_dict(seed)), encoding="utf-8")


def read_seed(path: str | Path) -> SeedSample:
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}")
    return seed_from_dict(obj)


def read_seeds_jsonl(path: str | Path) -> list[SeedSample]:
    seeds = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"$[line {lineno + 1}]", f"invalid JSON: {exc}")
            seeds.append(seed_from_dict(obj, f"$[line {lineno + 1}]"))
    return seeds


def write_seeds_jsonl(seeds: Iterable[SeedSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seed in seeds:
            fh.write(json.dumps(seed_to_dict(seed), ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    """Read a generic JSONL file (raw corpus records, judge records, ...)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"$[line {lineno + 1}]", f"invalid JSON: {exc}")
    return rows


def append_jsonl(row: dict, path: str | Path) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(row, ensure_ascii=False) + "\n")
