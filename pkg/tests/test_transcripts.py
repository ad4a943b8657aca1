"""Codec round-trips and schema validation."""

from __future__ import annotations

import json
import random

import pytest

from stepchat.errors import SchemaError
from stepchat.transcripts import (
    parse_timestamp,
    read_seed,
    read_seeds_jsonl,
    read_transcript,
    seed_from_dict,
    seed_to_dict,
    transcript_from_dict,
    transcript_to_dict,
    write_seed,
    write_seeds_jsonl,
    write_transcript,
)
from tests.conftest import make_seed, random_transcript

SEED_DOC = {
    "topic": "weekend plans",
    "characters": [
        {"name": "Alex", "personality": "i like gardening. i am retired."},
        {"name": "Sam", "personality": "i work at a coffee shop. i paint."},
    ],
    "recent_conversations": [
        {"timestamp": 100.0, "role": "Alex", "content": "seed message 0"},
        {"timestamp": 101.0, "role": "Sam", "content": "seed message 1"},
        {"timestamp": 102.0, "role": "Alex", "content": "seed message 2"},
        {"timestamp": 103.0, "role": "Sam", "content": "seed message 3"},
        {"timestamp": 104.0, "role": "Alex", "content": "seed message 4"},
        {"timestamp": 105.0, "role": "Sam", "content": "seed message 5"},
    ],
}


def test_write_read_identity_on_file(tmp_path):
    t = random_transcript(random.Random(3))
    path = tmp_path / "t.json"
    write_transcript(t, path)
    first = read_transcript(path)
    write_transcript(first, path)
    second = read_transcript(path)
    assert first == second


def test_missing_topic_reports_json_path(tmp_path):
    doc = dict(SEED_DOC)
    del doc["topic"]
    path = tmp_path / "seed.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(SchemaError) as err:
        read_transcript(path)
    assert "$.topic" in str(err.value)


def test_seed_file_reads_as_transcript_with_six_messages(tmp_path):
    path = tmp_path / "seed.json"
    path.write_text(json.dumps(SEED_DOC), encoding="utf-8")
    t = read_transcript(path)
    assert len(t.messages) == 6
    assert t.steps == []
    assert t.seed.topic == "weekend plans"
    assert [p.name for p in t.seed.characters] == ["Alex", "Sam"]
    assert [m.content for m in t.messages] == [
        f"seed message {i}" for i in range(6)
    ]
    assert all(m.origin == "seed" for m in t.messages)


def test_roundtrip_identity_over_random_corpus():
    """write -> read equals the original on 1000 random transcripts."""
    rng = random.Random(42)
    for _ in range(1000):
        t = random_transcript(rng)
        doc = transcript_to_dict(t)
        back = transcript_from_dict(json.loads(json.dumps(doc)))
        assert back == t


def test_seed_roundtrip(tmp_path):
    seed = make_seed(5)
    path = tmp_path / "s.json"
    write_seed(seed, path)
    assert read_seed(path) == seed


def test_seed_assigned_topic_roundtrip(tmp_path):
    seed = make_seed(3)
    seed.assigned_topic = "Outdoor hobbies and gardens"
    doc = seed_to_dict(seed)
    assert doc["assigned_topic"] == "Outdoor hobbies and gardens"
    assert seed_from_dict(doc) == seed


def test_jsonl_corpus_roundtrip(tmp_path):
    rng = random.Random(9)
    seeds = [random_transcript(rng).seed for _ in range(20)]
    path = tmp_path / "corpus.jsonl"
    write_seeds_jsonl(seeds, path)
    assert read_seeds_jsonl(path) == seeds


def test_bad_character_entry_reports_indexed_path():
    doc = json.loads(json.dumps(SEED_DOC))
    del doc["characters"][1]["personality"]
    with pytest.raises(SchemaError) as err:
        seed_from_dict(doc)
    assert "$.characters[1].personality" in str(err.value)


def test_bad_message_path_in_error():
    doc = json.loads(json.dumps(SEED_DOC))
    doc["recent_conversations"][2]["content"] = 42
    with pytest.raises(SchemaError) as err:
        seed_from_dict(doc)
    assert "$.recent_conversations[2].content" in str(err.value)


def test_timestamp_accepts_datetime_strings():
    assert parse_timestamp("2024-03-01 18:02", "$") > 0
    assert parse_timestamp("10:30", "$") == 10 * 3600 + 30 * 60
    assert parse_timestamp("17.5", "$") == 17.5
    assert parse_timestamp(3, "$") == 3.0


def test_timestamp_rejects_garbage():
    with pytest.raises(SchemaError):
        parse_timestamp("soonish", "$")
    with pytest.raises(SchemaError):
        parse_timestamp(-5, "$")
    with pytest.raises(SchemaError):
        parse_timestamp(None, "$")


def test_transcript_doc_has_contract_field_names():
    t = random_transcript(random.Random(11))
    doc = transcript_to_dict(t)
    assert set(doc).issuperset({"topic", "characters", "recent_conversations",
                                "messages", "steps", "system"})
    for c in doc["characters"]:
        assert set(c) == {"name", "personality"}
    for m in doc["recent_conversations"] + doc["messages"]:
        assert {"timestamp", "role", "content"}.issubset(set(m))
