"""Bundled prompt templates and the placeholder renderer.

Templates live under stepchat/templates/ as plain text with <|UPPER_CASE|>
placeholders. Rendering substitutes placeholders in a single pass over the
template, so placeholder-looking text inside substituted values is left
alone.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

_PLACEHOLDER_RE = re.compile(r"<\|([A-Z0-9_]+)\|>")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    path = resources.files("stepchat").joinpath("templates", f"{name}.txt")
    return path.read_text(encoding="utf-8").rstrip("\n")


@lru_cache(maxsize=None)
def load_rewrite_examples() -> tuple[str, ...]:
    """The five in-context examples for the seed-rewriting prompt."""
    path = resources.files("stepchat").joinpath("templates", "rewrite_examples.json")
    entries = json.loads(path.read_text(encoding="utf-8"))
    rendered = []
    for entry in entries:
        rendered.append(
            "Input:\n{input}\nOutput:\n{output}".format(
                input=entry["input"],
                output=json.dumps(entry["output"], ensure_ascii=False, indent=2),
            )
        )
    return tuple(rendered)


def render(template: str, **values: str) -> str:
    """Fill every <|KEY|> placeholder; keys must match exactly."""
    needed = set(_PLACEHOLDER_RE.findall(template))
    provided = set(values)
    if needed != provided:
        missing = needed - provided
        extra = provided - needed
        parts = []
        if missing:
            parts.append(f"missing placeholders: {sorted(missing)}")
        if extra:
            parts.append(f"unexpected placeholders: {sorted(extra)}")
        raise ValueError("; ".join(parts))
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template)


def render_template(name: str, **values: str) -> str:
    return render(load_template(name), **values)
