"""Deterministic dual-agent simulator on a virtual clock.

Floor control works through sampled time windows: the holder gets a window
W ~ Unif(w_min, w_max) and each delivered message consumes its display delay
from the remaining budget R. Choosing to wait zeroes R immediately, handing
the reclaimed floor to the partner. A message whose delay exceeds R is still
delivered (clamp-then-transfer), so at most one message per window can
overshoot.

The simulator never sleeps; timestamps advance a virtual clock that starts
at the last seed timestamp. With scripted backends a run is a pure function
of (seed, config, scripts), which the batch CLI relies on for reproducible
corpora.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, replace

from .agent import (
    AgentConfig,
    AgentState,
    decide,
    observe,
    observe_offline,
    preload_memory,
)
from .baselines import BaselineConfig, pd_generate, s1_generate
from .errors import DuetError, StepChatError
from .types import (
    ACTION_RESPOND,
    ACTION_WAIT,
    ORIGIN_AGENT,
    SYSTEM_PD,
    SYSTEM_S1,
    SYSTEM_S2,
    Message,
    SeedSample,
    StepRecord,
    Transcript,
)

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "python-random-mt19937"


@dataclass(frozen=True)
class WindowState:
    """Floor-control state: who holds the floor and how much time remains."""

    holder: str
    w: float
    r: float
    rng_seed: int

    def __post_init__(self):
        if not 0 <= self.r <= self.w:
            raise ValueError("remaining time must satisfy 0 <= r <= w")


@dataclass(frozen=True)
class SimConfig:
    """The [sim] config section."""

    w_min: float = 20.0
    w_max: float = 60.0
    max_turns: int = 10
    rng_seed: int = 0
    system: str = SYSTEM_S2
    turn_unit: str = "window"        # "window" counts floor transfers, "message" counts deliveries
    max_steps_per_window: int = 100  # guard against zero-delay respond loops

    def __post_init__(self):
        if not 0 < self.w_min <= self.w_max:
            raise ValueError("window bounds must satisfy 0 < w_min <= w_max")
        if self.max_turns < 1:
            raise ValueError("max_turns must be at least 1")
        if self.system not in (SYSTEM_PD, SYSTEM_S1, SYSTEM_S2):
            raise ValueError(f"unknown system {self.system!r}")
        if self.turn_unit not in ("window", "message"):
            raise ValueError(f"unknown turn unit {self.turn_unit!r}")


def sample_window(rng: random.Random, cfg: SimConfig) -> float:
    """Draw a window length uniformly from [w_min, w_max]."""
    return rng.uniform(cfg.w_min, cfg.w_max)


def step_window(ws: WindowState, action: str, t_t: float) -> WindowState:
    """Consume t_t seconds for a response, or zero the window for a wait."""
    if t_t < 0:
        raise ValueError("step duration must be non-negative")
    if action == ACTION_RESPOND:
        return replace(ws, r=max(0.0, ws.r - t_t))
    if action == ACTION_WAIT:
        return replace(ws, r=0.0)
    raise ValueError(f"unknown action {action!r}")


def run_duet(seed: SeedSample, cfg: SimConfig, backend_a, backend_b,
             agent_cfg: AgentConfig = AgentConfig(),
             baseline_cfg: BaselineConfig = BaselineConfig()) -> Transcript:
    """Simulate one dual-agent dialogue continuing the seed history.

    backend_a drives the first character, backend_b the second. The first
    floor goes to whoever did not send the last seed message (or the first
    character on an empty seed). On agent or backend failure the partial
    transcript is attached to the raised DuetError.
    """
    name_a, name_b = seed.names
    backends = {name_a: backend_a, name_b: backend_b}
    states = {
        name_a: AgentState(
            persona=seed.characters[0],
            partner_name=name_b,
            topic=seed.topic,
            memory=preload_memory(seed.recent_conversations, agent_cfg),
        ),
        name_b: AgentState(
            persona=seed.characters[1],
            partner_name=name_a,
            topic=seed.topic,
            memory=preload_memory(seed.recent_conversations, agent_cfg),
        ),
    }

    rng = random.Random(cfg.rng_seed)
    clock = seed.recent_conversations[-1].timestamp if seed.recent_conversations else 0.0
    messages = list(seed.recent_conversations)
    steps: list[StepRecord] = []
    trace: list[dict] = []

    if seed.recent_conversations:
        last_speaker = seed.recent_conversations[-1].role
        holder = name_b if last_speaker == name_a else name_a
    else:
        holder = name_a

    def partner_of(name: str) -> str:
        return name_b if name == name_a else name_a

    def build_transcript() -> Transcript:
        return Transcript(
            seed=seed,
            messages=messages,
            steps=steps,
            system_label=cfg.system,
            rng_algorithm=RNG_ALGORITHM,
            rng_seed=cfg.rng_seed,
            window_trace=trace,
        )

    def deliver(name: str, step) -> None:
        nonlocal clock
        clock += step.delay_s
        msg = Message(role=name, content=step.text, timestamp=clock,
                      origin=ORIGIN_AGENT)
        messages.append(msg)
        for agent_name in (name_a, name_b):
            if cfg.system == SYSTEM_S2:
                states[agent_name] = observe(
                    states[agent_name], msg, backends[agent_name], agent_cfg
                )
            else:
                states[agent_name] = observe_offline(states[agent_name], msg, agent_cfg)

    transfers = 0
    delivered = 0

    def budget_spent() -> bool:
        if cfg.turn_unit == "window":
            return transfers >= cfg.max_turns
        return delivered >= cfg.max_turns

    try:
        while not budget_spent():
            w = sample_window(rng, cfg)
            ws = WindowState(holder=holder, w=w, r=w, rng_seed=cfg.rng_seed)
            trace.append({"event": "window_open", "holder": holder, "w": w})

            if cfg.system == SYSTEM_S2:
                for _ in range(cfg.max_steps_per_window):
                    step = decide(states[holder], backends[holder], agent_cfg)
                    steps.append(StepRecord(agent=holder, step=step))
                    ws = step_window(ws, step.action, step.delay_s)
                    if step.action == ACTION_WAIT:
                        clock += step.delay_s
                        trace.append({"event": "step", "holder": holder,
                                      "action": step.action, "t": step.delay_s,
                                      "r_after": ws.r})
                        break
                    deliver(holder, step)
                    delivered += 1
                    trace.append({"event": "step", "holder": holder,
                                  "action": step.action, "t": step.delay_s,
                                  "r_after": ws.r})
                    if ws.r <= 0.0 or (cfg.turn_unit == "message" and budget_spent()):
                        break
                else:
                    logger.warning("window step guard hit for %s; forcing transfer", holder)
            else:
                generate = pd_generate if cfg.system == SYSTEM_PD else s1_generate
                window_steps = generate(states[holder], backends[holder], baseline_cfg)
                for step in window_steps:
                    ws = step_window(ws, step.action, step.delay_s)
                    steps.append(StepRecord(agent=holder, step=step))
                    deliver(holder, step)
                    delivered += 1
                    trace.append({"event": "step", "holder": holder,
                                  "action": step.action, "t": step.delay_s,
                                  "r_after": ws.r})
                    if ws.r <= 0.0 or (cfg.turn_unit == "message" and budget_spent()):
                        break

            transfers += 1
            trace.append({"event": "transfer", "from": holder,
                          "to": partner_of(holder)})
            holder = partner_of(holder)
    except StepChatError as exc:
        raise DuetError(f"duet run failed: {exc}", transcript=build_transcript()) from exc

    return build_transcript()
