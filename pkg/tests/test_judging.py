"""Judge harnesses with scripted judges."""

from __future__ import annotations

import json
import random

import pytest

from stepchat.backend import ScriptedBackend
from stepchat.errors import AnswerParseError, ScoreParseError
from stepchat.judging import (
    DIMENSIONS,
    anonymize_roles,
    judge_experience,
    judge_role_id,
    parse_answer,
    parse_scores,
)
from stepchat.metrics import RoleIdTally
from stepchat.transcripts import read_jsonl
from stepchat.types import Message, Transcript
from tests.conftest import make_seed


class FixedRng(random.Random):
    """random() always returns the same value; everything else is seeded."""

    def __init__(self, value: float):
        super().__init__(0)
        self._value = value

    def random(self):
        return self._value


def _score_reply(**overrides) -> str:
    scores = {dim: 75 for dim in DIMENSIONS}
    scores.update(overrides)
    return json.dumps(scores)


def _transcripts(n=2):
    out = []
    for _ in range(n):
        seed = make_seed(4)
        out.append(Transcript.from_seed(seed, "s2"))
    return out


def _dialogue_messages(ai_role="Sam"):
    return [
        Message(role="Alex", content="hey how was the trip", timestamp=1.0, origin="human"),
        Message(role="Sam", content="pretty great actually", timestamp=2.0, origin="agent"),
        Message(role="Alex", content="tell me more", timestamp=3.0, origin="human"),
    ]


# --- score parsing -----------------------------------------------------------

def test_parse_scores_happy_path():
    scores = parse_scores(_score_reply(natural=92))
    assert scores["natural"] == 92.0


def test_parse_scores_range_check():
    with pytest.raises(ScoreParseError):
        parse_scores(_score_reply(natural=130))


def test_parse_scores_missing_dimension():
    payload = {dim: 50 for dim in DIMENSIONS[:-1]}
    with pytest.raises(ScoreParseError):
        parse_scores(json.dumps(payload))


def test_parse_scores_strips_code_fence():
    assert parse_scores(f"```json\n{_score_reply()}\n```")["engaging"] == 75.0


# --- experience judging -------------------------------------------------------

def test_judge_experience_three_judges_mean():
    transcripts = _transcripts(1)
    judges = [
        ScriptedBackend([_score_reply(natural=80)], model_id="j0"),
        ScriptedBackend([_score_reply(natural=90)], model_id="j1"),
        ScriptedBackend([_score_reply(natural=100)], model_id="j2"),
    ]
    report = judge_experience(transcripts, judges, random.Random(1))
    assert report.per_transcript[0]["natural"] == 90.0
    assert report.corpus_means["natural"] == 90.0


def test_judge_experience_persists_raw_records(tmp_path):
    transcripts = _transcripts(2)
    judges = [
        ScriptedBackend([_score_reply(), _score_reply()], model_id=f"j{i}")
        for i in range(3)
    ]
    records_path = tmp_path / "records.jsonl"
    report = judge_experience(transcripts, judges, random.Random(2),
                              records_path=records_path)
    rows = read_jsonl(records_path)
    assert len(rows) == 6
    assert len(report.records) == 6
    assert not report.skipped


def test_judge_experience_out_of_range_retried_then_skipped():
    transcripts = _transcripts(1)
    bad_judge = ScriptedBackend(
        [_score_reply(natural=130), _score_reply(natural=140)], model_id="bad"
    )
    good_judge = ScriptedBackend([_score_reply(natural=60)], model_id="good")
    report = judge_experience(transcripts, [bad_judge, good_judge],
                              random.Random(3), retry_budget=1)
    assert len(report.skipped) == 1
    assert report.skipped[0]["judge"] == "bad"
    assert report.per_transcript[0]["natural"] == 60.0


def test_judge_experience_shuffles_per_judge_deterministically():
    transcripts = _transcripts(4)
    def run():
        judges = [
            ScriptedBackend([_score_reply()] * 4, model_id=f"j{i}") for i in range(2)
        ]
        judge_experience(transcripts, judges, random.Random(42))
        return [
            [c.prompt for c in judge.calls] for judge in judges
        ]
    first = run()
    second = run()
    assert first == second  # seeded shuffle is reproducible


# --- role identification --------------------------------------------------------

def test_parse_answer_variants():
    assert parse_answer("<answer>C</answer>") == "unclear"
    assert parse_answer("thinking...\n<answer> A </answer>") == "role1"
    assert parse_answer("<answer>B. Role 2 is AI</answer>") == "role2"
    with pytest.raises(AnswerParseError):
        parse_answer("Role 1 is the AI")


def test_anonymize_roles_mapping():
    messages = _dialogue_messages()
    dialogue, ai_label = anonymize_roles(messages, "Sam", FixedRng(0.9))
    # no flip: alphabetically first name becomes Role 1
    assert ai_label == "Role 2"
    assert "Role 1: hey how was the trip" in dialogue
    assert "Sam" not in dialogue

    dialogue_flipped, ai_label_flipped = anonymize_roles(messages, "Sam", FixedRng(0.1))
    assert ai_label_flipped == "Role 1"
    assert "Role 1: pretty great actually" in dialogue_flipped


def test_anonymization_never_changes_ground_truth():
    messages = _dialogue_messages()
    rng = random.Random(9)
    for _ in range(100):
        dialogue, ai_label = anonymize_roles(messages, "Sam", rng)
        agent_line = "pretty great actually"
        expected_prefix = f"{ai_label}: {agent_line}"
        assert expected_prefix in dialogue


def test_judge_role_id_unclear():
    judges = [ScriptedBackend(["<answer>C</answer>"], model_id="j")]
    result = judge_role_id(_dialogue_messages(), "Sam", judges, FixedRng(0.9))
    assert result.tally == RoleIdTally(0, 1, 0, 1)


def test_judge_role_id_error_mapping():
    # AI is Role 2 (no flip); judge says Role 1 -> error
    judges = [ScriptedBackend(["<answer>A</answer>"], model_id="j")]
    result = judge_role_id(_dialogue_messages(), "Sam", judges, FixedRng(0.9))
    assert result.tally == RoleIdTally(1, 0, 0, 1)


def test_judge_role_id_correct_mapping():
    judges = [ScriptedBackend(["<answer>B</answer>"], model_id="j")]
    result = judge_role_id(_dialogue_messages(), "Sam", judges, FixedRng(0.9))
    assert result.tally == RoleIdTally(0, 0, 1, 1)


def test_judge_role_id_parse_failure_excluded_from_total():
    judges = [ScriptedBackend(["no tags here", "still none"], model_id="flaky")]
    result = judge_role_id(_dialogue_messages(), "Sam", judges, FixedRng(0.9),
                           retry_budget=1)
    assert result.tally.n_total == 0
    assert len(result.excluded) == 1
    assert result.excluded[0]["judge"] == "flaky"


def test_judge_role_id_tally_closure():
    rng = random.Random(77)
    answers = ["<answer>A</answer>", "<answer>B</answer>", "<answer>C</answer>"]
    judges = [
        ScriptedBackend([rng.choice(answers)], model_id=f"j{i}") for i in range(9)
    ]
    result = judge_role_id(_dialogue_messages(), "Sam", judges, rng)
    t = result.tally
    assert t.n_error + t.n_unclear + t.n_correct == t.n_total == 9


def test_judge_role_id_prompt_is_rendered_template():
    judge = ScriptedBackend(["<answer>C</answer>"], model_id="j")
    judge_role_id(_dialogue_messages(), "Sam", [judge], FixedRng(0.9))
    prompt = judge.calls[0].prompt
    assert "variant of Turing test" in prompt
    assert "Wrap your final answer in <answer></answer> tags." in prompt
    assert "Role 1: hey how was the trip" in prompt
