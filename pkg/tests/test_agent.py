"""Step-wise agent: prompting, deciding, delays, and memory maintenance."""

from __future__ import annotations

import os
import random

import pytest

from stepchat.agent import (
    AgentConfig,
    AgentState,
    apply_summary,
    compute_delay,
    decide,
    infer_persona,
    observe,
    observe_offline,
    preload_memory,
    render_prompt,
)
from stepchat.backend import ScriptedBackend
from stepchat.errors import EmptyContext, MalformedOutput, QueueExhausted
from stepchat.types import ACTION_RESPOND, ACTION_WAIT, Memory, Message, Persona
from tests.conftest import make_seed


def _state(n_messages=2, summary="", cfg=AgentConfig()):
    seed = make_seed(n_messages)
    memory = preload_memory(seed.recent_conversations, cfg)
    if summary:
        memory = Memory(
            short_term=memory.short_term,
            long_term_summary=summary,
            pending=memory.pending,
        )
    return AgentState(
        persona=seed.characters[1],
        partner_name=seed.characters[0].name,
        topic=seed.topic,
        memory=memory,
    )


def _msg(role, content, ts=500.0):
    return Message(role=role, content=content, timestamp=ts, origin="human")


# --- render_prompt ----------------------------------------------------------

def test_render_prompt_contains_instructions_and_history():
    state = _state(1)
    prompt = render_prompt(state)
    assert "Who sent the last message" in prompt
    assert "Alex: seed message 0" in prompt
    assert 'You are Sam, and your persona is "i work at a coffee shop. i paint."' in prompt
    assert 'about "weekend plans"' in prompt
    assert "<response>" in prompt and "<wait>" in prompt


def test_render_prompt_empty_context_errors():
    state = AgentState(
        persona=Persona(name="Sam", personality="p"),
        partner_name="Alex",
        topic="t",
        memory=Memory(),
    )
    with pytest.raises(EmptyContext):
        render_prompt(state)


def test_render_prompt_caps_history_at_n_short():
    cfg = AgentConfig(n_short=20)
    state = _state(2, cfg=cfg)
    for i in range(25):
        state = observe_offline(state, _msg("Alex", f"extra {i}", 500.0 + i), cfg)
    prompt = render_prompt(state)
    history_lines = [
        line for line in prompt.splitlines() if line.startswith(("Alex:", "Sam:"))
    ]
    assert len(history_lines) == 20
    assert "extra 24" in prompt
    assert "extra 4" not in prompt


def test_render_prompt_summary_prefixed():
    state = _state(1, summary="they planned a picnic")
    prompt = render_prompt(state)
    assert "they planned a picnic" in prompt
    assert prompt.index("they planned a picnic") < prompt.index("Alex: seed message 0")


def test_render_prompt_deterministic():
    state = _state(3)
    assert render_prompt(state) == render_prompt(state)


# --- compute_delay ----------------------------------------------------------

def test_compute_delay_paper_constants():
    assert compute_delay(100, 50, 2.0, AgentConfig()) == 10.0


def test_compute_delay_clamps_to_zero():
    assert compute_delay(0, 0, 5.0, AgentConfig()) == 0.0


def test_compute_delay_pure_thinking_pause():
    assert compute_delay(10, 0, 0.0, AgentConfig()) == pytest.approx(0.2)


def test_compute_delay_matches_reference_on_random_inputs():
    rng = random.Random(99)
    cfg = AgentConfig()
    for _ in range(200):
        n_think = rng.randint(0, 2000)
        n_resp = rng.randint(0, 500)
        t_sys = rng.uniform(0.0, 30.0)
        expected = max(0.0, cfg.k_think * n_think + cfg.k_type * n_resp - t_sys)
        assert abs(compute_delay(n_think, n_resp, t_sys, cfg) - expected) < 1e-12


def test_compute_delay_monotonicity():
    rng = random.Random(5)
    cfg = AgentConfig()
    for _ in range(300):
        n_think = rng.randint(0, 300)
        n_resp = rng.randint(0, 300)
        t_sys = rng.uniform(0.0, 10.0)
        base = compute_delay(n_think, n_resp, t_sys, cfg)
        assert base >= 0.0
        assert compute_delay(n_think + 7, n_resp, t_sys, cfg) >= base
        assert compute_delay(n_think, n_resp + 7, t_sys, cfg) >= base
        assert compute_delay(n_think, n_resp, t_sys + 1.5, cfg) <= base


# --- decide -----------------------------------------------------------------

def test_decide_wait_passthrough():
    backend = ScriptedBackend(["<think>let them finish</think><wait>wait</wait>"])
    step = decide(_state(), backend)
    assert step.action == ACTION_WAIT
    assert step.delay_s == pytest.approx(0.02 * len("let them finish"))


def test_decide_fills_delay_from_t_system():
    think = "x" * 100
    text = "y" * 50
    backend = ScriptedBackend(
        [f"<think>{think}</think><response>{text}</response>"], fixed_t_system_s=2.0
    )
    step = decide(_state(), backend)
    assert step.action == ACTION_RESPOND
    assert step.delay_s == 10.0


def test_decide_retries_on_malformed_then_succeeds():
    backend = ScriptedBackend([
        "garbage",
        "more garbage",
        "<think>ok</think><response>made it</response>",
    ])
    step = decide(_state(), backend, AgentConfig(retry_budget=2))
    assert step.action == ACTION_RESPOND
    assert step.text == "made it"
    assert len(backend.calls) == 3


def test_decide_budget_exhaustion_raises_malformed():
    backend = ScriptedBackend(["bad", "bad", "bad"])
    with pytest.raises(MalformedOutput):
        decide(_state(), backend, AgentConfig(retry_budget=2))


def test_decide_propagates_backend_errors():
    backend = ScriptedBackend([])
    with pytest.raises(QueueExhausted):
        decide(_state(), backend)


def test_decide_deterministic_trace():
    def run():
        backend = ScriptedBackend(
            ["<think>t</think><response>same every time</response>"],
            fixed_t_system_s=0.75,
        )
        state = _state(3)
        step = decide(state, backend, AgentConfig())
        return (backend.calls[0].prompt, step)

    assert run() == run()


# --- observe / memory -------------------------------------------------------

def test_observe_first_message_into_empty_state():
    state = AgentState(
        persona=Persona(name="Sam", personality="p"),
        partner_name="Alex",
        topic="t",
    )
    backend = ScriptedBackend([])
    state = observe(state, _msg("Alex", "hi"), backend)
    assert len(state.memory.short_term) == 1
    assert state.memory.long_term_summary == ""


def test_observe_eviction_and_summary_trace():
    """n_short=3, k_summarize=2, five messages: summary folds the evictions."""
    cfg = AgentConfig(n_short=3, k_summarize=2)
    state = AgentState(
        persona=Persona(name="Sam", personality="p"),
        partner_name="Alex",
        topic="t",
    )
    backend = ScriptedBackend(["S"])
    for i in range(5):
        state = observe(state, _msg("Alex", f"m{i}", 100.0 + i), backend, cfg)
    assert [m.content for m in state.memory.short_term] == ["m2", "m3", "m4"]
    assert state.memory.long_term_summary == "S"
    assert state.memory.messages_since_summary < cfg.k_summarize
    # exactly one summarizer call: the counter tick with nothing pending resets silently
    assert len(backend.calls) == 1
    prompt = backend.calls[0].prompt
    assert "Alex: m0" in prompt
    assert "m3" not in prompt


def test_observe_summary_failure_keeps_state_and_counter():
    cfg = AgentConfig(n_short=1, k_summarize=2)
    state = AgentState(
        persona=Persona(name="Sam", personality="p"),
        partner_name="Alex",
        topic="t",
    )
    ok = ScriptedBackend(["S1"])
    failing = ScriptedBackend([])  # QueueExhausted on any call
    state = observe(state, _msg("Alex", "m0", 1.0), failing, cfg)
    state = observe(state, _msg("Alex", "m1", 2.0), failing, cfg)  # trigger fails
    assert state.memory.long_term_summary == ""
    assert state.memory.messages_since_summary == 2
    assert len(state.memory.pending) == 1
    # next observe retries the refresh and succeeds
    state = observe(state, _msg("Alex", "m2", 3.0), ok, cfg)
    assert state.memory.long_term_summary == "S1"
    assert state.memory.messages_since_summary == 0
    assert state.memory.pending == ()


def test_observe_bound_holds_over_long_run():
    cfg = AgentConfig(n_short=4, k_summarize=3)
    state = AgentState(
        persona=Persona(name="Sam", personality="p"),
        partner_name="Alex",
        topic="t",
    )
    backend = ScriptedBackend(["s"] * 50)
    for i in range(40):
        state = observe(state, _msg("Alex", f"m{i}", float(i)), backend, cfg)
        assert len(state.memory.short_term) <= cfg.n_short
        assert state.memory.messages_since_summary < cfg.k_summarize


def test_preload_memory_splits_overflow():
    seed = make_seed(8)
    memory = preload_memory(seed.recent_conversations, AgentConfig(n_short=5))
    assert len(memory.short_term) == 5
    assert len(memory.pending) == 3
    assert memory.short_term[-1] == seed.recent_conversations[-1]


def test_apply_summary_resets_counters():
    state = _state(2)
    state = observe_offline(state, _msg("Alex", "x"), AgentConfig())
    state = apply_summary(state, "the story so far")
    assert state.memory.long_term_summary == "the story so far"
    assert state.memory.messages_since_summary == 0
    assert state.memory.pending == ()


# --- infer_persona ----------------------------------------------------------

def test_infer_persona_passthrough():
    backend = ScriptedBackend(["loves gardening. retired teacher"])
    persona = infer_persona(
        [_msg("Ruth", "my roses bloomed", 1.0)], "Ruth", backend
    )
    assert persona.name == "Ruth"
    assert persona.personality == "loves gardening. retired teacher"


def test_infer_persona_empty_history_rejected():
    with pytest.raises(ValueError):
        infer_persona([], "Ruth", ScriptedBackend(["x"]))


@pytest.mark.skipif(
    not (os.environ.get("CHAT_API_KEY") and os.environ.get("CHAT_ENDPOINT")),
    reason="remote smoke test needs CHAT_API_KEY and CHAT_ENDPOINT",
)
def test_infer_persona_remote_smoke():
    from stepchat.backend import RemoteBackend

    backend = RemoteBackend(endpoint=os.environ["CHAT_ENDPOINT"],
                            model_id=os.environ.get("CHAT_MODEL", "default"))
    history = [
        _msg("Ruth", "spent all morning repotting my tomatoes", 1.0),
        _msg("Sam", "again?", 2.0),
        _msg("Ruth", "the greenhouse is my happy place", 3.0),
        _msg("Sam", "fair enough", 4.0),
        _msg("Ruth", "you should see my roses this year", 5.0),
        _msg("Sam", "send pictures!", 6.0),
    ]
    persona = infer_persona(history, "Ruth", backend)
    assert "garden" in persona.personality.lower() or "plant" in persona.personality.lower()
