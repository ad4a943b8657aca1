"""Domain types shared by every module.

All types are value objects: construct them once, never mutate (the single
exception is SeedSample.assigned_topic, which the topic-assignment stage
fills in). Validation happens at construction so downstream code can trust
the invariants.

A Transcript's ``messages`` list is the full dialogue timeline: it starts
with the seed history (origin "seed") and continues with whatever the
simulator or a live session produced. Codecs serialize only the non-seed
suffix under the "messages" key; the seed history lives under
"recent_conversations".
"""

from __future__ import annotations

from dataclasses import dataclass, field

ORIGIN_SEED = "seed"
ORIGIN_AGENT = "agent"
ORIGIN_HUMAN = "human"
ORIGINS = (ORIGIN_SEED, ORIGIN_AGENT, ORIGIN_HUMAN)

ACTION_RESPOND = "respond"
ACTION_WAIT = "wait"

SYSTEM_PD = "pd"
SYSTEM_S1 = "s1"
SYSTEM_S2 = "s2"
SYSTEM_HUMAN_MIXED = "human-mixed"
SYSTEM_LABELS = (SYSTEM_PD, SYSTEM_S1, SYSTEM_S2, SYSTEM_HUMAN_MIXED)


@dataclass(frozen=True)
class Message:
    """One chat bubble: who said what, and when."""

    role: str
    content: str
    timestamp: float
    origin: str = ORIGIN_SEED

    def __post_init__(self):
        if not self.role:
            raise ValueError("message role must be non-empty")
        if not self.content.strip():
            raise ValueError("message content must be non-empty")
        if self.timestamp < 0:
            raise ValueError("message timestamp must be non-negative")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown message origin {self.origin!r}")


@dataclass(frozen=True)
class AgentStep:
    """One policy step: the thinking trace plus a single respond-or-wait action.

    n_think and n_response are derived on construction (Unicode scalar
    counts) and therefore can never drift from the text they describe.
    delay_s starts at 0 and is filled by a delay model.
    """

    think: str
    action: str
    text: str = ""
    delay_s: float = 0.0
    n_think: int = field(init=False, default=0)
    n_response: int = field(init=False, default=0)

    def __post_init__(self):
        if self.action not in (ACTION_RESPOND, ACTION_WAIT):
            raise ValueError(f"unknown action {self.action!r}")
        if self.action == ACTION_RESPOND and not self.text:
            raise ValueError("respond step must carry non-empty text")
        if self.action == ACTION_WAIT and self.text:
            raise ValueError("wait step must not carry response text")
        if self.delay_s < 0:
            raise ValueError("delay_s must be non-negative")
        object.__setattr__(self, "n_think", len(self.think))
        object.__setattr__(
            self, "n_response", len(self.text) if self.action == ACTION_RESPOND else 0
        )

    @property
    def is_wait(self) -> bool:
        return self.action == ACTION_WAIT


@dataclass(frozen=True)
class Persona:
    """A named speaker with a period-joined personality descriptor list."""

    name: str
    personality: str

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("persona name must be non-empty")
        if not self.personality.strip():
            raise ValueError("persona personality must be non-empty")


@dataclass
class SeedSample:
    """Topic + two personas + a starting dialogue history.

    topic may be empty for corpora that ship without descriptors (the
    summarize stage derives one); assigned_topic stays None until the
    topic-assignment stage labels the seed with one of the final merged
    topics.
    """

    topic: str
    characters: tuple[Persona, Persona]
    recent_conversations: tuple[Message, ...]
    assigned_topic: str | None = None

    def __post_init__(self):
        self.characters = tuple(self.characters)
        self.recent_conversations = tuple(self.recent_conversations)
        if len(self.characters) != 2:
            raise ValueError("seed must name exactly two characters")
        names = {p.name for p in self.characters}
        if len(names) != 2:
            raise ValueError("seed characters must have distinct names")
        last = -1.0
        for i, msg in enumerate(self.recent_conversations):
            if msg.role not in names:
                raise ValueError(
                    f"seed message {i} has role {msg.role!r} not among characters"
                )
            if msg.timestamp < last:
                raise ValueError(f"seed message {i} breaks timestamp ordering")
            last = msg.timestamp

    @property
    def names(self) -> tuple[str, str]:
        return (self.characters[0].name, self.characters[1].name)


@dataclass(frozen=True)
class Memory:
    """Short-term raw messages plus a periodically refreshed long-term summary.

    ``pending`` holds messages evicted from short_term that have not yet been
    folded into the summary; the next successful refresh consumes it.
    """

    short_term: tuple[Message, ...] = ()
    long_term_summary: str = ""
    messages_since_summary: int = 0
    pending: tuple[Message, ...] = ()

    def __post_init__(self):
        if self.messages_since_summary < 0:
            raise ValueError("messages_since_summary must be non-negative")

    @property
    def is_empty(self) -> bool:
        return not self.short_term and not self.long_term_summary


@dataclass(frozen=True)
class StepRecord:
    """An AgentStep attributed to the agent that emitted it."""

    agent: str
    step: AgentStep


@dataclass
class Transcript:
    """A seed plus the full message timeline and the steps that produced it."""

    seed: SeedSample
    messages: list[Message] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    system_label: str = SYSTEM_HUMAN_MIXED
    rng_algorithm: str | None = None
    rng_seed: int | None = None
    window_trace: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.system_label not in SYSTEM_LABELS:
            raise ValueError(f"unknown system label {self.system_label!r}")
        self.validate()

    def validate(self):
        """Check ordering, the seed prefix, and step/message correspondence."""
        k = len(self.seed.recent_conversations)
        if tuple(self.messages[:k]) != self.seed.recent_conversations:
            raise ValueError("transcript messages must start with the seed history")
        last = -1.0
        for i, msg in enumerate(self.messages):
            if i >= k and msg.origin == ORIGIN_SEED:
                raise ValueError(f"message {i}: seed-origin message after seed prefix")
            if msg.timestamp < last:
                raise ValueError(f"message {i} breaks timestamp ordering")
            last = msg.timestamp
        sent: dict[str, int] = {}
        for msg in self.messages[k:]:
            if msg.origin == ORIGIN_AGENT:
                sent[msg.role] = sent.get(msg.role, 0) + 1
        responded: dict[str, int] = {}
        for rec in self.steps:
            if rec.step.action == ACTION_RESPOND:
                responded[rec.agent] = responded.get(rec.agent, 0) + 1
        if sent != responded:
            raise ValueError(
                f"agent messages {sent} do not match respond steps {responded}"
            )

    @classmethod
    def from_seed(cls, seed: SeedSample, system_label: str, **kwargs) -> "Transcript":
        return cls(
            seed=seed,
            messages=list(seed.recent_conversations),
            system_label=system_label,
            **kwargs,
        )

    @property
    def new_messages(self) -> list[Message]:
        """Messages generated after the seed history."""
        return self.messages[len(self.seed.recent_conversations):]

    @property
    def last_timestamp(self) -> float:
        return self.messages[-1].timestamp if self.messages else 0.0
