"""Parser for the tagged step-output grammar.

A valid step is one think segment followed by exactly one action segment
(response or wait), with nothing but whitespace around or between them.
Closing tags are accepted in both slash form (``</think>``) and backslash
form (``<\\think>``); templates always emit slash form, but some model
families reproduce the backslash spelling they were shown.

Think content is preserved verbatim; response text is trimmed of leading
and trailing whitespace before it becomes a message.
"""

from __future__ import annotations

import re

from .errors import MalformedOutput
from .types import ACTION_RESPOND, ACTION_WAIT, AgentStep

_THINK_RE = re.compile(r"<think>(.*?)<[/\\]think>", re.DOTALL)
_RESPONSE_RE = re.compile(r"<response>(.*?)<[/\\]response>", re.DOTALL)
_WAIT_RE = re.compile(r"<wait>(.*?)<[/\\]wait>", re.DOTALL)


def _skip_ws(raw: str, pos: int) -> int:
    while pos < len(raw) and raw[pos].isspace():
        pos += 1
    return pos


def parse_step(raw: str) -> AgentStep:
    """Parse one model output into an AgentStep (delay_s left at 0).

    Raises MalformedOutput on any grammar violation: missing think segment,
    missing action segment, both action segments present, or trailing
    non-whitespace after the action.
    """
    pos = _skip_ws(raw, 0)
    think_match = _THINK_RE.match(raw, pos)
    if think_match is None:
        raise MalformedOutput("no think segment")
    think = think_match.group(1)

    pos = _skip_ws(raw, think_match.end())
    response_match = _RESPONSE_RE.match(raw, pos)
    wait_match = _WAIT_RE.match(raw, pos)
    if response_match is not None:
        text = response_match.group(1).strip()
        if not text:
            raise MalformedOutput("empty response text")
        action, end = ACTION_RESPOND, response_match.end()
    elif wait_match is not None:
        text, action, end = "", ACTION_WAIT, wait_match.end()
    else:
        raise MalformedOutput("no action segment")

    if raw[end:].strip():
        raise MalformedOutput("trailing content after action segment")
    return AgentStep(think=think, action=action, text=text)


def render_step(step: AgentStep) -> str:
    """Inverse of parse_step for well-formed steps, always in slash form."""
    if step.action == ACTION_RESPOND:
        return f"<think>{step.think}</think> <response>{step.text}</response>"
    return f"<think>{step.think}</think> <wait>wait</wait>"
