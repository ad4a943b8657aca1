"""The step-wise decision agent.

One call to decide() produces exactly one action: either a single short
response message or an explicit wait. The display delay of a step is
modeled as thinking time plus typing time minus the measured backend
latency:

    delay = max(0, k_think * n_think + k_type * n_response - t_system)

Waits carry their thinking component too, so a simulator clock can account
for silent deliberation; nothing is displayed for them.

Memory keeps the most recent n_short raw messages verbatim. Older messages
are evicted into a pending buffer and folded into a long-term summary every
k_summarize observed messages; a failed summary refresh is retried on the
next trigger.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .backend import ask
from .errors import BackendError, EmptyContext, MalformedOutput
from .parsing import parse_step
from .prompts import render_template
from .types import ACTION_WAIT, AgentStep, Memory, Message, Persona

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgentConfig:
    """The [agent] config section."""

    k_think: float = 0.02       # seconds per thinking character
    k_type: float = 0.2         # seconds per typed character
    n_short: int = 20           # short-term memory size in messages
    k_summarize: int = 10       # messages between summary refreshes
    retry_budget: int = 2       # extra model calls allowed on malformed output
    listen_recheck_s: float = 8.0  # live-mode inactivity before a waiting agent re-decides

    def __post_init__(self):
        if self.k_think < 0 or self.k_type < 0:
            raise ValueError("delay coefficients must be non-negative")
        if self.n_short < 1:
            raise ValueError("n_short must be at least 1")
        if self.k_summarize < 1:
            raise ValueError("k_summarize must be at least 1")
        if self.retry_budget < 0:
            raise ValueError("retry_budget must be non-negative")


@dataclass(frozen=True)
class AgentState:
    """Everything one agent knows inside one session."""

    persona: Persona
    partner_name: str
    topic: str
    memory: Memory = Memory()

    def __post_init__(self):
        if self.persona.name == self.partner_name:
            raise ValueError("agent and partner must have distinct names")


def render_history(memory: Memory) -> str:
    """History block: optional prior-summary line, then name: content lines."""
    lines = []
    if memory.long_term_summary:
        lines.append(f"[Summary of the earlier conversation: {memory.long_term_summary}]")
    for msg in memory.short_term:
        lines.append(f"{msg.role}: {msg.content}")
    return "\n".join(lines)


def render_prompt(state: AgentState) -> str:
    """Fill the step-decision template from memory and persona."""
    if state.memory.is_empty:
        raise EmptyContext("no history and no summary to condition on")
    return render_template(
        "agent_step",
        HISTORY=render_history(state.memory),
        NAME1=state.partner_name,
        NAME2=state.persona.name,
        PERSONALITY2=state.persona.personality,
        TOPIC=state.topic,
    )


def compute_delay(n_think: int, n_response: int, t_system_s: float,
                  cfg: AgentConfig) -> float:
    """Display delay: thinking plus typing time minus backend latency, floored at 0."""
    return max(0.0, cfg.k_think * n_think + cfg.k_type * n_response - t_system_s)


def decide(state: AgentState, backend, cfg: AgentConfig = AgentConfig()) -> AgentStep:
    """Run one policy step: prompt, parse the tagged output, fill the delay.

    Malformed outputs are retried with fresh backend calls up to
    cfg.retry_budget times; the last MalformedOutput propagates after that.
    """
    prompt = render_prompt(state)
    last_error: MalformedOutput | None = None
    for attempt in range(cfg.retry_budget + 1):
        result = ask(backend, prompt)
        try:
            step = parse_step(result.text)
        except MalformedOutput as exc:
            last_error = exc
            logger.debug("malformed step output (attempt %d): %s", attempt + 1, exc)
            continue
        delay = compute_delay(step.n_think, step.n_response, result.t_system_s, cfg)
        return replace(step, delay_s=delay)
    assert last_error is not None
    raise last_error


def observe(state: AgentState, msg: Message, backend,
            cfg: AgentConfig = AgentConfig()) -> AgentState:
    """Fold one message into memory, refreshing the summary when due.

    A summary refresh only happens when evicted messages are pending; if the
    counter comes due with nothing pending it simply resets. On backend
    failure the message is still recorded and the refresh is retried at the
    next trigger.
    """
    memory = state.memory
    short = memory.short_term + (msg,)
    pending = memory.pending
    if len(short) > cfg.n_short:
        overflow = len(short) - cfg.n_short
        pending = pending + short[:overflow]
        short = short[overflow:]
    counter = memory.messages_since_summary + 1
    summary = memory.long_term_summary

    if counter >= cfg.k_summarize:
        if pending:
            try:
                summary = summarize(summary, pending, backend)
            except BackendError as exc:
                logger.warning("summary refresh failed, will retry: %s", exc)
            else:
                pending = ()
                counter = 0
        else:
            counter = 0

    new_memory = Memory(
        short_term=short,
        long_term_summary=summary,
        messages_since_summary=counter,
        pending=pending,
    )
    return replace(state, memory=new_memory)


def preload_memory(messages, cfg: AgentConfig = AgentConfig()) -> Memory:
    """Seed a fresh memory from history without any backend calls.

    The newest n_short messages become short-term memory; anything older
    goes to the pending buffer for the first summary refresh to consume.
    """
    messages = tuple(messages)
    if len(messages) <= cfg.n_short:
        return Memory(short_term=messages)
    split = len(messages) - cfg.n_short
    return Memory(short_term=messages[split:], pending=messages[:split])


def observe_offline(state: AgentState, msg: Message,
                    cfg: AgentConfig = AgentConfig()) -> AgentState:
    """Memory bookkeeping only: no summary refresh, no backend calls.

    Used by baseline agents (which have no summarizer) and by session replay,
    where logged summary updates are applied separately.
    """
    memory = state.memory
    short = memory.short_term + (msg,)
    pending = memory.pending
    if len(short) > cfg.n_short:
        overflow = len(short) - cfg.n_short
        pending = pending + short[:overflow]
        short = short[overflow:]
    new_memory = replace(
        memory,
        short_term=short,
        pending=pending,
        messages_since_summary=memory.messages_since_summary + 1,
    )
    return replace(state, memory=new_memory)


def apply_summary(state: AgentState, summary: str) -> AgentState:
    """Install a summary produced elsewhere (session replay path)."""
    new_memory = replace(
        state.memory,
        long_term_summary=summary,
        pending=(),
        messages_since_summary=0,
    )
    return replace(state, memory=new_memory)


def summarize(existing_summary: str, messages, backend) -> str:
    """One summarizer call merging the old summary with evicted messages."""
    prompt = render_template(
        "summarize_memory",
        EXISTING_SUMMARY=existing_summary or "(none)",
        CONVERSATIONS="\n".join(f"{m.role}: {m.content}" for m in messages),
    )
    return ask(backend, prompt).text.strip()


def infer_persona(history, name: str, backend) -> Persona:
    """Derive a persona for ``name`` from dialogue history via the backend."""
    history = list(history)
    if not history:
        raise ValueError("infer_persona requires a non-empty history")
    prompt = render_template(
        "infer_persona",
        NAME=name,
        HISTORY="\n".join(f"{m.role}: {m.content}" for m in history),
    )
    personality = ask(backend, prompt).text.strip()
    return Persona(name=name, personality=personality)
