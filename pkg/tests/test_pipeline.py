"""Corpus pipeline: conversion, filtering, clustering, assignment."""

from __future__ import annotations

import json
import random

import pytest

from stepchat.backend import ScriptedBackend
from stepchat.errors import CardinalityError, CoverageError, SchemaError
from stepchat.pipeline import (
    FilterThresholds,
    TopicTree,
    assign_topics,
    cluster_two_level,
    convert,
    convert_corpus,
    filter_corpus,
    filter_with_report,
    summarize_topics,
    top_topics_report,
    turn_count,
)
from stepchat.transcripts import read_jsonl
from stepchat.types import Message, Persona, SeedSample
from tests.conftest import make_personas, make_seed

RAW_RECORD = {
    "id": "rec-1",
    "personas": [
        ["i like gardening", "i am retired"],
        ["i work at a coffee shop", "i paint on weekends"],
    ],
    "conversation": [
        "hello how are you",
        "good just got off work",
        "i was out in my garden",
        "nice, i was painting",
    ],
}

GOOD_SEED_JSON = json.dumps({
    "topic": "gardens and painting after work",
    "characters": [
        {"name1": "Ruth", "personality": "i like gardening. i am retired."},
        {"name2": "Casey", "personality": "i work at a coffee shop. i paint on weekends."},
    ],
    "recent_conversations": [
        {"timestamp": "2024-03-01 18:02", "role": "Ruth", "content": "hello how are you"},
        {"timestamp": "2024-03-01 18:03", "role": "Casey", "content": "good"},
        {"timestamp": "2024-03-01 18:03", "role": "Casey", "content": "just got off work"},
        {"timestamp": "2024-03-01 18:05", "role": "Ruth", "content": "i was out in my garden"},
        {"timestamp": "2024-03-01 18:06", "role": "Casey", "content": "nice, i was painting"},
    ],
})


# --- convert -------------------------------------------------------------------

def test_convert_valid_output():
    seed = convert(RAW_RECORD, ScriptedBackend([GOOD_SEED_JSON]))
    assert seed.topic == "gardens and painting after work"
    assert seed.names == ("Ruth", "Casey")
    assert len(seed.recent_conversations) == 5
    assert len(seed.topic.split()) <= 10


def test_convert_prompt_carries_examples_and_input():
    backend = ScriptedBackend([GOOD_SEED_JSON])
    convert(RAW_RECORD, backend)
    prompt = backend.calls[0].prompt
    assert "Here are 5 examples:" in prompt
    assert "Persona 1: i like gardening i am retired" in prompt
    assert "A: hello how are you" in prompt
    assert prompt.count('"recent_conversations"') >= 5  # the bundled examples


def test_convert_rejects_role_not_among_characters():
    bad = json.loads(GOOD_SEED_JSON)
    bad["recent_conversations"][0]["role"] = "Zoe"
    with pytest.raises(SchemaError):
        convert(RAW_RECORD, ScriptedBackend([json.dumps(bad)]), retry_budget=0)


def test_convert_corpus_skip_logging(tmp_path):
    records = [dict(RAW_RECORD, id=f"rec-{i}") for i in range(3)]
    replies = [GOOD_SEED_JSON, "not json", "still not json", GOOD_SEED_JSON]
    backend = ScriptedBackend(replies)
    skip_path = tmp_path / "skips.jsonl"
    seeds, skips = convert_corpus(
        records, backend_factory=lambda: backend, retry_budget=1,
        skip_log_path=skip_path,
    )
    assert len(seeds) == 2
    assert len(skips) == 1
    logged = read_jsonl(skip_path)
    assert logged[0]["stage"] == "convert"
    assert logged[0]["id"] == "rec-1"


# --- filter ----------------------------------------------------------------------

def _seed_with_shape(turns: int, messages: int) -> SeedSample:
    """Build a seed with exactly `turns` runs over `messages` messages."""
    assert turns <= messages
    personas = make_personas()
    names = ["Alex", "Sam"]
    sizes = [1] * turns
    for i in range(messages - turns):
        sizes[i % turns] += 1
    out = []
    ts = 0.0
    for run_index, size in enumerate(sizes):
        role = names[run_index % 2]
        for _ in range(size):
            ts += 1.0
            out.append(Message(role=role, content=f"m{ts}", timestamp=ts))
    return SeedSample(topic="t", characters=personas, recent_conversations=tuple(out))


def test_turn_count_matches_brute_force():
    rng = random.Random(4)
    for _ in range(200):
        turns = rng.randint(1, 10)
        messages = rng.randint(turns, 40)
        seed = _seed_with_shape(turns, messages)
        # brute force: count adjacent role changes
        changes = sum(
            1 for a, b in zip(seed.recent_conversations, seed.recent_conversations[1:])
            if a.role != b.role
        )
        assert turn_count(seed) == changes + 1 == turns


def test_filter_spec_examples():
    th = FilterThresholds()
    keep = _seed_with_shape(7, 30)
    too_few_turns = _seed_with_shape(5, 30)
    too_many_messages = _seed_with_shape(7, 50)
    kept = filter_corpus([keep, too_few_turns, too_many_messages], th)
    assert kept == [keep]


def test_filter_preserves_order_and_reports():
    seeds = [
        _seed_with_shape(6, 25), _seed_with_shape(9, 30), _seed_with_shape(8, 40),
        _seed_with_shape(7, 24), _seed_with_shape(6, 41),
    ]
    kept, report = filter_with_report(seeds, FilterThresholds())
    assert kept == [seeds[0], seeds[2]]
    assert report.total == 5
    assert report.turn_pass == 4  # all but the 9-turn seed
    assert report.both_pass == 2


def test_filter_idempotent():
    rng = random.Random(6)
    seeds = [
        _seed_with_shape(rng.randint(1, 12), rng.randint(12, 60)) for _ in range(60)
    ]
    th = FilterThresholds()
    once = filter_corpus(seeds, th)
    assert filter_corpus(once, th) == once


# --- summarize_topics -------------------------------------------------------------

def test_summarize_topics_passthrough():
    seeds = [make_seed(2), make_seed(2), make_seed(2)]
    backend = ScriptedBackend([])  # never called: topics already present
    descriptors, skips = summarize_topics(seeds, backend)
    assert descriptors == ["weekend plans"] * 3
    assert not skips


def test_summarize_topics_derives_and_skips_on_failure():
    seeds = [make_seed(2, topic=""), make_seed(2, topic=""), make_seed(2, topic="")]
    # two replies, then exhaustion -> the third record is skipped
    backend = ScriptedBackend(["weekend hobbies and plans",
                               "a very long topic descriptor that runs well past the ten word cap"])
    descriptors, skips = summarize_topics(seeds, backend)
    assert descriptors[0] == "weekend hobbies and plans"
    assert len(descriptors[1].split()) == 10  # truncated to ten words
    assert descriptors[2] is None
    assert len(skips) == 1
    assert skips[0].stage == "summarize"


def test_convert_corpus_parallel_workers():
    records = [dict(RAW_RECORD, id=f"rec-{i}") for i in range(6)]

    def factory():
        return ScriptedBackend([GOOD_SEED_JSON])

    seeds, skips = convert_corpus(records, backend_factory=factory, parallelism=3)
    assert len(seeds) == 6
    assert not skips


# --- clustering --------------------------------------------------------------------

def _names(prefix: str, count: int) -> list[str]:
    return [f"{prefix} {i}" for i in range(count)]


def test_cluster_two_level_batching_and_cardinality():
    descriptors = [f"topic {i}" for i in range(1200)]
    replies = [
        json.dumps(_names("sub-a", 60)),
        json.dumps(_names("sub-b", 60)),
        json.dumps(_names("final", 60)),
    ]
    backend = ScriptedBackend(replies)
    tree = cluster_two_level(descriptors, backend)
    assert len(tree.batch_subtopics) == 2
    assert [len(batch) for batch in tree.batch_subtopics] == [60, 60]
    assert len(tree.merged_topics) == 60
    stage2_prompt = backend.calls[-1].prompt
    assert "120 topic categories" in stage2_prompt


def test_cluster_partial_final_batch_may_yield_fewer():
    descriptors = [f"topic {i}" for i in range(650)]
    replies = [
        json.dumps(_names("sub-a", 60)),
        json.dumps(_names("sub-b", 10)),  # partial batch of 50 descriptors
        json.dumps(_names("final", 60)),
    ]
    tree = cluster_two_level(descriptors, ScriptedBackend(replies))
    assert [len(b) for b in tree.batch_subtopics] == [60, 10]


def test_cluster_wrong_cardinality_fails_after_budget():
    descriptors = [f"topic {i}" for i in range(600)]
    replies = [json.dumps(_names("sub", 60)), json.dumps(_names("final", 59))]
    with pytest.raises(CardinalityError):
        cluster_two_level(descriptors, ScriptedBackend(replies), retry_budget=0)


def test_cluster_retries_cardinality_failures():
    descriptors = [f"topic {i}" for i in range(600)]
    replies = [
        json.dumps(_names("sub", 59)),   # wrong, retried
        json.dumps(_names("sub", 60)),
        json.dumps(_names("final", 60)),
    ]
    tree = cluster_two_level(descriptors, ScriptedBackend(replies), retry_budget=1)
    assert len(tree.batch_subtopics[0]) == 60


# --- assignment -------------------------------------------------------------------

def _assignment_reply(ids_by_topic: dict[str, list[int]]) -> str:
    return json.dumps(ids_by_topic)


def test_assign_topics_valid_mapping():
    seeds = [make_seed(2, topic=f"topic {i}") for i in range(5)]
    tree = TopicTree(merged_topics=["T1", "T2"])
    reply = _assignment_reply({"T1": [0, 2, 4], "T2": [1, 3]})
    tree = assign_topics(seeds, tree, ScriptedBackend([reply]))
    assert tree.assignment == {0: "T1", 1: "T2", 2: "T1", 3: "T2", 4: "T1"}
    assert seeds[3].assigned_topic == "T2"


def test_assign_topics_missing_id_fails():
    seeds = [make_seed(2) for _ in range(5)]
    tree = TopicTree(merged_topics=["T1", "T2"])
    reply = _assignment_reply({"T1": [0, 2, 4], "T2": [1]})  # id 3 missing
    with pytest.raises(CoverageError):
        assign_topics(seeds, tree, ScriptedBackend([reply]), retry_budget=0)


def test_assign_topics_unknown_topic_fails():
    seeds = [make_seed(2) for _ in range(2)]
    tree = TopicTree(merged_topics=["T1"])
    reply = _assignment_reply({"T9": [0, 1]})
    with pytest.raises(CoverageError):
        assign_topics(seeds, tree, ScriptedBackend([reply]), retry_budget=0)


def test_assign_topics_duplicate_id_fails():
    seeds = [make_seed(2) for _ in range(2)]
    tree = TopicTree(merged_topics=["T1", "T2"])
    reply = _assignment_reply({"T1": [0, 1], "T2": [1]})
    with pytest.raises(CoverageError):
        assign_topics(seeds, tree, ScriptedBackend([reply]), retry_budget=0)


def test_assign_topics_batches_cover_everything():
    seeds = [make_seed(2, topic=f"t{i}") for i in range(7)]
    tree = TopicTree(merged_topics=["T1", "T2"])
    replies = [
        _assignment_reply({"T1": [0, 1], "T2": [2]}),
        _assignment_reply({"T2": [3, 4, 5]}),
        _assignment_reply({"T1": [6]}),
    ]
    tree = assign_topics(seeds, tree, ScriptedBackend(replies), batch_size=3)
    assert sorted(tree.assignment) == list(range(7))


# --- report ---------------------------------------------------------------------

def test_top_topics_report_counts_and_ties():
    tree = TopicTree(assignment={0: "T1", 1: "T1", 2: "T2"})
    assert top_topics_report(tree) == [("T1", 2), ("T2", 1)]
    tied = TopicTree(assignment={0: "B", 1: "A"})
    assert top_topics_report(tied) == [("A", 1), ("B", 1)]


def test_top_topics_report_conserves_total():
    rng = random.Random(3)
    assignment = {i: f"T{rng.randint(1, 9)}" for i in range(500)}
    tree = TopicTree(assignment=assignment)
    ranked = top_topics_report(tree)
    assert sum(count for _, count in ranked) == 500
    assert top_topics_report(tree, top_k=3) == ranked[:3]


def test_topic_tree_roundtrip():
    tree = TopicTree(
        batch_subtopics=[["a", "b"]],
        merged_topics=["x"],
        assignment={0: "x", 1: "x"},
    )
    assert TopicTree.from_dict(json.loads(json.dumps(tree.to_dict()))) == tree
