"""The two comparison systems: punctuation splitting and one-shot delimiter output.

Both generate a whole reply in a single model call, split it into fragments,
and pace each fragment at a flat seconds-per-character rate. Neither can
wait: their step lists contain only respond actions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .agent import AgentState, render_history
from .backend import ask
from .errors import EmptyContext
from .prompts import render_template
from .types import ACTION_RESPOND, AgentStep

# Boundary after a run of sentence-final punctuation; the run stays with the
# preceding fragment.
_SENTENCE_BOUNDARY_RE = re.compile(r"(?<=[.!?])(?![.!?])")


@dataclass(frozen=True)
class BaselineConfig:
    """The [baseline] config section."""

    char_delay_s: float = 0.3
    delimiter: str = "[newline]"

    def __post_init__(self):
        if self.char_delay_s < 0:
            raise ValueError("char_delay_s must be non-negative")
        if not self.delimiter:
            raise ValueError("delimiter must be non-empty")


def split_sentences(reply: str) -> list[str]:
    """Split at sentence-final punctuation runs (. ! ?), dropping empties."""
    fragments = [frag.strip() for frag in _SENTENCE_BOUNDARY_RE.split(reply)]
    return [frag for frag in fragments if frag]


def split_delimited(reply: str, delimiter: str) -> list[str]:
    fragments = [frag.strip() for frag in reply.split(delimiter)]
    return [frag for frag in fragments if frag]


def _steps_from_fragments(fragments, cfg: BaselineConfig) -> list[AgentStep]:
    return [
        AgentStep(
            think="",
            action=ACTION_RESPOND,
            text=frag,
            delay_s=cfg.char_delay_s * len(frag),
        )
        for frag in fragments
    ]


def _render_baseline_prompt(template: str, state: AgentState, **extra) -> str:
    if state.memory.is_empty:
        raise EmptyContext("no history and no summary to condition on")
    return render_template(
        template,
        HISTORY=render_history(state.memory),
        NAME1=state.partner_name,
        NAME2=state.persona.name,
        PERSONALITY2=state.persona.personality,
        TOPIC=state.topic,
        **extra,
    )


def pd_generate(state: AgentState, backend,
                cfg: BaselineConfig = BaselineConfig()) -> list[AgentStep]:
    """One long reply split mechanically at sentence punctuation."""
    reply = ask(backend, _render_baseline_prompt("pd_reply", state)).text
    return _steps_from_fragments(split_sentences(reply), cfg)


def s1_generate(state: AgentState, backend,
                cfg: BaselineConfig = BaselineConfig()) -> list[AgentStep]:
    """One delimiter-separated multi-message reply, split on the delimiter."""
    prompt = _render_baseline_prompt("s1_reply", state, DELIMITER=cfg.delimiter)
    reply = ask(backend, prompt).text
    return _steps_from_fragments(split_delimited(reply, cfg.delimiter), cfg)
