"""stepchat: step-wise chat agents with explicit send/wait decisions.

The package covers the whole workflow: parsing tagged agent outputs,
modeling display delays, simulating dual-agent dialogues under time-window
floor control, converting and clustering seed corpora, computing dialogue
metrics, and serving a live paced chat session over HTTP.
"""

__version__ = "0.1.0"

from .agent import AgentConfig, AgentState, compute_delay, decide, observe
from .backend import ChatRequest, ChatResult, RemoteBackend, ScriptedBackend
from .baselines import BaselineConfig, pd_generate, s1_generate
from .errors import MalformedOutput, SchemaError, StepChatError
from .metrics import (
    MetricsReport,
    RoleIdTally,
    acmc,
    distinct_n,
    pass_rate,
    run_distribution,
    words_per_message,
)
from .parsing import parse_step
from .sim import SimConfig, WindowState, run_duet, sample_window, step_window
from .transcripts import read_transcript, write_transcript
from .types import (
    AgentStep,
    Memory,
    Message,
    Persona,
    SeedSample,
    StepRecord,
    Transcript,
)

__all__ = [
    "AgentConfig",
    "AgentState",
    "AgentStep",
    "BaselineConfig",
    "ChatRequest",
    "ChatResult",
    "Memory",
    "Message",
    "MetricsReport",
    "MalformedOutput",
    "Persona",
    "RemoteBackend",
    "RoleIdTally",
    "SchemaError",
    "ScriptedBackend",
    "SeedSample",
    "SimConfig",
    "StepChatError",
    "StepRecord",
    "Transcript",
    "WindowState",
    "acmc",
    "compute_delay",
    "decide",
    "distinct_n",
    "observe",
    "parse_step",
    "pass_rate",
    "pd_generate",
    "read_transcript",
    "run_distribution",
    "run_duet",
    "s1_generate",
    "sample_window",
    "step_window",
    "words_per_message",
    "write_transcript",
]
