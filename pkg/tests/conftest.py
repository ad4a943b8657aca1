"""Shared fixtures and generators for the test suite."""

from __future__ import annotations

import random
import string

import pytest

from stepchat.types import (
    ORIGIN_AGENT,
    ORIGIN_HUMAN,
    ORIGIN_SEED,
    ACTION_RESPOND,
    ACTION_WAIT,
    AgentStep,
    Message,
    Persona,
    SeedSample,
    StepRecord,
    Transcript,
)

WORDS = (
    "hey", "ok", "sure", "garden", "coffee", "today", "really", "nice",
    "later", "why", "how", "busy", "tired", "yes", "no", "maybe", "soon",
    "work", "home", "game", "book", "rain", "lunch", "plan", "idea",
)


def make_personas(name_a: str = "Alex", name_b: str = "Sam") -> tuple[Persona, Persona]:
    return (
        Persona(name=name_a, personality="i like gardening. i am retired."),
        Persona(name=name_b, personality="i work at a coffee shop. i paint."),
    )


def make_seed(n_messages: int = 4, topic: str = "weekend plans",
              name_a: str = "Alex", name_b: str = "Sam",
              start_ts: float = 100.0, last_role: str | None = None) -> SeedSample:
    personas = make_personas(name_a, name_b)
    names = [name_a, name_b]
    messages = []
    for i in range(n_messages):
        role = names[i % 2]
        if last_role is not None and i == n_messages - 1:
            role = last_role
        messages.append(
            Message(role=role, content=f"seed message {i}", timestamp=start_ts + i,
                    origin=ORIGIN_SEED)
        )
    return SeedSample(topic=topic, characters=personas,
                      recent_conversations=tuple(messages))


def random_text(rng: random.Random, max_words: int = 6) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, max_words)))


def random_messages(rng: random.Random, roles: tuple[str, str],
                    count: int, start_ts: float = 0.0,
                    origin: str = ORIGIN_SEED) -> list[Message]:
    ts = start_ts
    out = []
    for _ in range(count):
        ts += rng.uniform(0.0, 9.0)
        out.append(
            Message(role=rng.choice(roles), content=random_text(rng),
                    timestamp=ts, origin=origin)
        )
    return out


def random_transcript(rng: random.Random) -> Transcript:
    names = ("Alex", "Sam")
    seed_msgs = random_messages(rng, names, rng.randint(0, 6), start_ts=10.0)
    seed = SeedSample(
        topic=random_text(rng, 4),
        characters=make_personas(*names),
        recent_conversations=tuple(seed_msgs),
    )
    last_ts = seed_msgs[-1].timestamp if seed_msgs else 10.0
    steps = []
    new_msgs = []
    ts = last_ts
    for _ in range(rng.randint(0, 10)):
        role = rng.choice(names)
        if rng.random() < 0.75:
            text = random_text(rng)
            delay = rng.uniform(0.0, 12.0)
            ts += delay
            step = AgentStep(think=random_text(rng), action=ACTION_RESPOND,
                             text=text, delay_s=delay)
            steps.append(StepRecord(agent=role, step=step))
            new_msgs.append(
                Message(role=role, content=text, timestamp=ts, origin=ORIGIN_AGENT)
            )
        else:
            steps.append(StepRecord(
                agent=role,
                step=AgentStep(think=random_text(rng), action=ACTION_WAIT),
            ))
    return Transcript(
        seed=seed,
        messages=list(seed.recent_conversations) + new_msgs,
        steps=steps,
        system_label=rng.choice(("pd", "s1", "s2", "human-mixed")),
        rng_algorithm="python-random-mt19937",
        rng_seed=rng.randint(0, 10**6),
    )


@pytest.fixture
def seed4() -> SeedSample:
    return make_seed(4)
