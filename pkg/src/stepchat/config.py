"""TOML config loading for the CLI and the chat service.

Sections map one-to-one onto the per-module config dataclasses:

    [backend]   kind, endpoint, model_id, temperature, retry_budget, ...
    [agent]     k_think, k_type, n_short, k_summarize, retry_budget, listen_recheck_s
    [baseline]  char_delay_s, delimiter
    [sim]       w_min, w_max, max_turns, rng_seed, system, turn_unit
    [pipeline]  parallelism, retry_budget, batch_size, subtopics_per_batch, final_k
    [service]   host, port, data_dir, seeds_path, session_timeout_s

Unknown keys raise immediately; the credential comes from the CHAT_API_KEY
environment variable, never from the file.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agent import AgentConfig
from .backend import BackendConfig
from .baselines import BaselineConfig
from .sim import SimConfig


@dataclass
class PipelineConfig:
    parallelism: int = 1
    retry_budget: int = 1
    batch_size: int = 600
    subtopics_per_batch: int = 60
    final_k: int = 60
    assign_batch_size: int = 50


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8008
    data_dir: str = "./stepchat-data"
    seeds_path: str = ""
    session_timeout_s: float = 1800.0


@dataclass
class AppConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)


_SECTIONS = {
    "backend": BackendConfig,
    "agent": AgentConfig,
    "baseline": BaselineConfig,
    "sim": SimConfig,
    "pipeline": PipelineConfig,
    "service": ServiceConfig,
}


def _build_section(cls, values: dict, section: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown keys in [{section}]: {sorted(unknown)}")
    return cls(**values)


def load_config(path: str | Path | None = None) -> AppConfig:
    """Load an AppConfig; a missing path yields all defaults."""
    if path is None:
        return AppConfig()
    raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    for section, cls in _SECTIONS.items():
        kwargs[section] = _build_section(cls, raw.get(section, {}), section)
    return AppConfig(**kwargs)
