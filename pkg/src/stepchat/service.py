"""Live paced chat sessions over HTTP, plus the role-identification study store.

The engine is thread-based: each session serializes its state mutations
behind one lock, and at most one decision worker runs per session at any
time. A worker decides, sleeps out the display delay on a monotonic clock
(typing_started fires when the thinking phase ends), delivers the message,
and loops until the agent chooses to wait. User messages arriving mid-cycle
never cancel a pending delivery; they set a dirty flag so the worker
re-reads history before going idle.

Persistence is an append-only JSONL record log per session. Restoring
replays the log: memory is rebuilt mechanically (summary updates and silent
counter resets are applied from their logged records, never by re-calling
the summarizer) and respond steps that were decided but not yet delivered
are re-scheduled from their remaining delay.
"""

import json
import logging
import random
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

from .agent import (
    AgentConfig,
    AgentState,
    apply_summary,
    decide,
    observe,
    observe_offline,
    preload_memory,
)
from .backend import BackendConfig, make_backend
from .baselines import BaselineConfig, pd_generate, s1_generate
from .config import AppConfig, ServiceConfig
from .errors import (
    DuplicateSubmission,
    EmptyMessage,
    SessionClosed,
    StepChatError,
    UnknownSeed,
    UnknownSession,
    UnknownTranscript,
)
from .metrics import RoleIdTally, pass_rate, runs
from .transcripts import (
    append_jsonl,
    message_from_dict,
    message_to_dict,
    read_jsonl,
    read_seeds_jsonl,
    seed_from_dict,
    seed_to_dict,
)
from .types import (
    ORIGIN_AGENT,
    ORIGIN_HUMAN,
    SYSTEM_PD,
    SYSTEM_S1,
    SYSTEM_S2,
    AgentStep,
    Message,
    SeedSample,
)

logger = logging.getLogger(__name__)

CLIENT_EVENT_TYPES = ("message", "typing_started", "waiting", "closed")

MIN_HUMAN_TURNS = 5  # sessions below this are flagged low quality, not dropped


@dataclass
class _Session:
    id: str
    system: str
    seed: SeedSample
    agent_name: str
    human_name: str
    model_id: str
    backend: object
    state: AgentState
    base_ts: float
    wall_start: float
    log_path: Path
    lock: threading.RLock = field(default_factory=threading.RLock)
    records: list[dict] = field(default_factory=list)
    next_seq: int = 1
    status: str = "active"
    inflight: bool = False
    dirty: bool = False
    last_activity: float = field(default_factory=time.time)
    last_virtual_ts: float = 0.0
    stop_event: threading.Event = field(default_factory=threading.Event)
    recheck_timer: threading.Timer | None = None
    cond: threading.Condition = None  # type: ignore[assignment]

    def __post_init__(self):
        self.cond = threading.Condition(self.lock)
        self.last_virtual_ts = self.base_ts


class SessionEngine:
    """Owns all live sessions and the questionnaire study store."""

    def __init__(self, config: AppConfig | None = None, backend_factory=None,
                 sleeper=None, rng: random.Random | None = None):
        self.config = config or AppConfig()
        self.agent_cfg: AgentConfig = self.config.agent
        self.baseline_cfg: BaselineConfig = self.config.baseline
        self.data_dir = Path(self.config.service.data_dir)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "study").mkdir(parents=True, exist_ok=True)
        self._backend_factory = backend_factory or (
            lambda system: make_backend(self.config.backend)
        )
        self._sleep_wait = sleeper or (lambda event, seconds: event.wait(seconds))
        self._sessions: dict[str, _Session] = {}
        self._registry_lock = threading.Lock()
        self._seeds: dict[str, SeedSample] = {}
        self._rng = rng or random.Random()
        if self.config.service.seeds_path:
            self.load_seeds(self.config.service.seeds_path)
        self._study_transcripts: dict[str, dict] = {}
        self._questionnaires: dict[str, dict] = {}
        self._submissions: list[dict] = []
        self._load_study_store()

    # -- seed corpus -------------------------------------------------------

    def load_seeds(self, path) -> None:
        for index, seed in enumerate(read_seeds_jsonl(path)):
            self._seeds[str(index)] = seed

    def add_seed(self, seed_id: str, seed: SeedSample) -> None:
        self._seeds[seed_id] = seed

    # -- session lifecycle ---------------------------------------------------

    def create_session(self, seed_id: str, system: str,
                       agent_character: int | None = None) -> str:
        if system not in (SYSTEM_PD, SYSTEM_S1, SYSTEM_S2):
            raise ValueError(f"unknown system {system!r}")
        seed = self._seeds.get(seed_id)
        if seed is None:
            raise UnknownSeed(f"no seed with id {seed_id!r}")
        if agent_character is None:
            # the agent keeps the voice of whoever spoke last; the human
            # continues as the natural next speaker
            if seed.recent_conversations:
                last_role = seed.recent_conversations[-1].role
                agent_character = 0 if seed.names[0] == last_role else 1
            else:
                agent_character = 1
        agent_persona = seed.characters[agent_character]
        human_name = seed.names[1 - agent_character]

        session_id = uuid.uuid4().hex[:12]
        base_ts = (
            seed.recent_conversations[-1].timestamp
            if seed.recent_conversations else 0.0
        )
        state = AgentState(
            persona=agent_persona,
            partner_name=human_name,
            topic=seed.topic,
            memory=preload_memory(seed.recent_conversations, self.agent_cfg),
        )
        session = _Session(
            id=session_id,
            system=system,
            seed=seed,
            agent_name=agent_persona.name,
            human_name=human_name,
            model_id=self.config.backend.model_id,
            backend=self._backend_factory(system),
            state=state,
            base_ts=base_ts,
            wall_start=time.time(),
            log_path=self.data_dir / "sessions" / f"{session_id}.jsonl",
        )
        with self._registry_lock:
            self._sessions[session_id] = session
        self._log(session, {
            "type": "created",
            "seed_id": seed_id,
            "seed": seed_to_dict(seed),
            "system": system,
            "agent_character": agent_character,
            "model_id": session.model_id,
            "wall_start": session.wall_start,
            "base_ts": base_ts,
        })
        logger.info("session %s created (system=%s, seed=%s)", session_id, system, seed_id)
        return session_id

    def _get(self, session_id: str) -> _Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def session_info(self, session_id: str) -> dict:
        session = self._get(session_id)
        with session.lock:
            return {
                "id": session.id,
                "system": session.system,
                "status": session.status,
                "topic": session.seed.topic,
                "human_name": session.human_name,
                "agent_name": session.agent_name,
            }

    def post_user_message(self, session_id: str, text: str) -> int:
        session = self._get(session_id)
        text = text.strip()
        if not text:
            raise EmptyMessage("user message is empty")
        with session.lock:
            if session.status != "active":
                raise SessionClosed(f"session {session_id} is closed")
            ts = self._virtual_now(session)
            msg = Message(role=session.human_name, content=text, timestamp=ts,
                          origin=ORIGIN_HUMAN)
            self._observe_logged(session, msg)
            seq = self._emit(session, "message", message_to_dict(msg))
            session.last_activity = time.time()
            self._cancel_recheck(session)
            if not session.inflight:
                session.inflight = True
                threading.Thread(
                    target=self._decision_worker, args=(session,), daemon=True
                ).start()
            else:
                session.dirty = True
            return seq

    def close_session(self, session_id: str) -> None:
        session = self._get(session_id)
        with session.lock:
            if session.status != "active":
                return
            session.status = "closed"
            session.stop_event.set()
            self._cancel_recheck(session)
            self._emit(session, "closed", {})
        self._export_study_transcript(session)
        logger.info("session %s closed", session_id)

    # -- event access --------------------------------------------------------

    def events(self, session_id: str, after: int = 0) -> list[dict]:
        session = self._get(session_id)
        with session.lock:
            return [
                r for r in session.records
                if r["seq"] > after and r["type"] in CLIENT_EVENT_TYPES
            ]

    def wait_events(self, session_id: str, after: int, timeout: float = 0.5) -> list[dict]:
        session = self._get(session_id)
        with session.cond:
            batch = [
                r for r in session.records
                if r["seq"] > after and r["type"] in CLIENT_EVENT_TYPES
            ]
            if batch:
                return batch
            session.cond.wait(timeout)
            return [
                r for r in session.records
                if r["seq"] > after and r["type"] in CLIENT_EVENT_TYPES
            ]

    def all_records(self, session_id: str) -> list[dict]:
        session = self._get(session_id)
        with session.lock:
            return list(session.records)

    # -- internals -------------------------------------------------------

    def _virtual_now(self, session: _Session) -> float:
        ts = session.base_ts + (time.time() - session.wall_start)
        ts = max(ts, session.last_virtual_ts)
        session.last_virtual_ts = ts
        return ts

    def _log(self, session: _Session, record: dict) -> int:
        with session.cond:
            record = {"seq": session.next_seq, "t": time.time(), **record}
            session.next_seq += 1
            session.records.append(record)
            append_jsonl(record, session.log_path)
            session.cond.notify_all()
            return record["seq"]

    def _emit(self, session: _Session, event_type: str, payload: dict) -> int:
        return self._log(session, {"type": event_type, **payload})

    def _observe_logged(self, session: _Session, msg: Message) -> None:
        """Fold a message into agent memory, logging summary-state changes."""
        before = session.state.memory
        if session.system == SYSTEM_S2:
            session.state = observe(session.state, msg, session.backend, self.agent_cfg)
        else:
            session.state = observe_offline(session.state, msg, self.agent_cfg)
        after = session.state.memory
        if after.long_term_summary != before.long_term_summary:
            self._log(session, {
                "type": "summary_updated",
                "summary": after.long_term_summary,
            })
        elif after.messages_since_summary == 0 and before.messages_since_summary + 1 >= self.agent_cfg.k_summarize:
            self._log(session, {"type": "counter_reset"})

    def _cancel_recheck(self, session: _Session) -> None:
        if session.recheck_timer is not None:
            session.recheck_timer.cancel()
            session.recheck_timer = None

    def _arm_recheck(self, session: _Session) -> None:
        self._cancel_recheck(session)
        timer = threading.Timer(
            self.agent_cfg.listen_recheck_s, self._recheck, args=(session,)
        )
        timer.daemon = True
        session.recheck_timer = timer
        timer.start()

    def _recheck(self, session: _Session) -> None:
        with session.lock:
            if session.status != "active" or session.inflight:
                return
            session.inflight = True
            threading.Thread(
                target=self._decision_worker, args=(session,), daemon=True
            ).start()

    def _sleep_until(self, session: _Session, deadline_mono: float) -> bool:
        """Sleep on the monotonic clock; False if the session was stopped."""
        while True:
            remaining = deadline_mono - time.monotonic()
            if remaining <= 0:
                return True
            if self._sleep_wait(session.stop_event, remaining):
                return False

    def _decision_worker(self, session: _Session,
                         resume_steps: list[dict] | None = None) -> None:
        try:
            if resume_steps:
                for record in resume_steps:
                    if not self._deliver_resumed(session, record):
                        return
            while True:
                with session.lock:
                    if session.status != "active":
                        return
                    state = session.state
                try:
                    if session.system == SYSTEM_S2:
                        batch = [decide(state, session.backend, self.agent_cfg)]
                    elif session.system == SYSTEM_PD:
                        batch = pd_generate(state, session.backend, self.baseline_cfg)
                    else:
                        batch = s1_generate(state, session.backend, self.baseline_cfg)
                except StepChatError as exc:
                    logger.warning("session %s decision failed: %s", session.id, exc)
                    self._log(session, {"type": "decision_error", "error": str(exc)})
                    with session.lock:
                        session.inflight = False
                    return

                went_idle = self._run_batch(session, batch)
                if not went_idle:
                    return  # stopped mid-delivery
                with session.lock:
                    if session.status != "active":
                        return
                    if session.dirty:
                        session.dirty = False
                        continue
                    if session.system == SYSTEM_S2 and batch[-1].is_wait:
                        self._emit(session, "waiting", {"role": session.agent_name})
                        session.inflight = False
                        self._arm_recheck(session)
                        return
                    if session.system != SYSTEM_S2:
                        session.inflight = False
                        return
                # S2 delivered a message and nothing new arrived: keep deciding.
        finally:
            with session.lock:
                if session.inflight and (session.status != "active" or session.stop_event.is_set()):
                    session.inflight = False

    def _run_batch(self, session: _Session, batch) -> bool:
        """Deliver a batch of steps with wall-clock pacing. False if stopped."""
        for step in batch:
            decided_mono = time.monotonic()
            step_seq = self._log(session, {
                "type": "agent_step",
                "agent": session.agent_name,
                "think": step.think,
                "action": step.action,
                "text": step.text,
                "delay_s": step.delay_s,
                "decided_at": time.time(),
            })
            if step.is_wait:
                return True
            think_s = min(self.agent_cfg.k_think * step.n_think, step.delay_s)
            if not self._sleep_until(session, decided_mono + think_s):
                return False
            self._emit(session, "typing_started", {
                "role": session.agent_name,
                "typing_s": step.delay_s - think_s,
                "step_seq": step_seq,
            })
            if not self._sleep_until(session, decided_mono + step.delay_s):
                return False
            self._deliver(session, step, step_seq)
        return True

    def _deliver(self, session: _Session, step, step_seq: int) -> None:
        with session.lock:
            if session.status != "active":
                return
            ts = self._virtual_now(session)
            msg = Message(role=session.agent_name, content=step.text,
                          timestamp=ts, origin=ORIGIN_AGENT)
            self._observe_logged(session, msg)
            payload = message_to_dict(msg)
            payload["step_seq"] = step_seq
            self._emit(session, "message", payload)
            session.last_activity = time.time()

    def _deliver_resumed(self, session: _Session, record: dict) -> bool:
        """Deliver a step that was decided before a restart."""
        remaining = max(0.0, record["decided_at"] + record["delay_s"] - time.time())
        if not self._sleep_until(session, time.monotonic() + remaining):
            return False
        step = AgentStep(think=record["think"], action=record["action"],
                         text=record["text"], delay_s=record["delay_s"])
        self._deliver(session, step, record["seq"])
        return True

    # -- persistence / restore ----------------------------------------------

    def restore(self) -> list[str]:
        """Reload every persisted session; active ones resume their loops."""
        restored = []
        for log_file in sorted((self.data_dir / "sessions").glob("*.jsonl")):
            session_id = log_file.stem
            if session_id in self._sessions:
                continue
            try:
                session, pending = self._replay(log_file)
            except (StepChatError, KeyError, ValueError) as exc:
                logger.error("could not restore session %s: %s", session_id, exc)
                continue
            with self._registry_lock:
                self._sessions[session.id] = session
            restored.append(session.id)
            if session.status == "active":
                if pending:
                    with session.lock:
                        session.inflight = True
                    threading.Thread(
                        target=self._decision_worker,
                        args=(session,),
                        kwargs={"resume_steps": pending},
                        daemon=True,
                    ).start()
                elif session.records and session.records[-1]["type"] == "waiting":
                    self._arm_recheck(session)
        return restored

    def _replay(self, log_file: Path) -> tuple[_Session, list[dict]]:
        records = read_jsonl(log_file)
        if not records or records[0]["type"] != "created":
            raise ValueError("session log must start with a created record")
        head = records[0]
        seed = seed_from_dict(head["seed"])
        agent_character = head["agent_character"]
        agent_persona = seed.characters[agent_character]
        human_name = seed.names[1 - agent_character]
        state = AgentState(
            persona=agent_persona,
            partner_name=human_name,
            topic=seed.topic,
            memory=preload_memory(seed.recent_conversations, self.agent_cfg),
        )
        session = _Session(
            id=log_file.stem,
            system=head["system"],
            seed=seed,
            agent_name=agent_persona.name,
            human_name=human_name,
            model_id=head.get("model_id", "default"),
            backend=self._backend_factory(head["system"]),
            state=state,
            base_ts=head["base_ts"],
            wall_start=head["wall_start"],
            log_path=log_file,
        )
        delivered_step_seqs = set()
        for record in records:
            session.records.append(record)
            session.next_seq = max(session.next_seq, record["seq"] + 1)
            if record["type"] == "message":
                msg = message_from_dict(record, "$", default_origin=ORIGIN_HUMAN)
                session.state = observe_offline(session.state, msg, self.agent_cfg)
                session.last_virtual_ts = max(session.last_virtual_ts, msg.timestamp)
                if "step_seq" in record:
                    delivered_step_seqs.add(record["step_seq"])
            elif record["type"] == "summary_updated":
                session.state = apply_summary(session.state, record["summary"])
            elif record["type"] == "counter_reset":
                session.state = replace(
                    session.state,
                    memory=replace(session.state.memory, messages_since_summary=0),
                )
            elif record["type"] == "closed":
                session.status = "closed"
        pending = [
            r for r in session.records
            if r["type"] == "agent_step" and r["action"] == "respond"
            and r["seq"] not in delivered_step_seqs
        ]
        return session, pending

    # -- inactivity ----------------------------------------------------------

    def reap_idle_sessions(self) -> list[str]:
        """Close sessions idle past the configured timeout."""
        timeout = self.config.service.session_timeout_s
        now = time.time()
        closed = []
        for session_id, session in list(self._sessions.items()):
            with session.lock:
                idle = now - session.last_activity
                expired = session.status == "active" and idle > timeout
            if expired:
                self.close_session(session_id)
                closed.append(session_id)
        return closed

    def start_reaper(self, interval_s: float = 60.0) -> None:
        """Background thread closing idle sessions; stops on shutdown()."""
        self._reaper_stop = threading.Event()

        def loop():
            while not self._reaper_stop.wait(interval_s):
                try:
                    self.reap_idle_sessions()
                except Exception:
                    logger.exception("session reaper pass failed")

        threading.Thread(target=loop, daemon=True, name="session-reaper").start()

    def shutdown(self) -> None:
        if getattr(self, "_reaper_stop", None) is not None:
            self._reaper_stop.set()
        for session in list(self._sessions.values()):
            session.stop_event.set()
            self._cancel_recheck(session)

    # -- study store -----------------------------------------------------------

    def _study_path(self, name: str) -> Path:
        return self.data_dir / "study" / f"{name}.jsonl"

    def _load_study_store(self) -> None:
        path = self._study_path("transcripts")
        if path.exists():
            for row in read_jsonl(path):
                self._study_transcripts[row["id"]] = row
        qpath = self._study_path("questionnaires")
        if qpath.exists():
            for row in read_jsonl(qpath):
                self._questionnaires[row["id"]] = row
        spath = self._study_path("submissions")
        if spath.exists():
            self._submissions = read_jsonl(spath)

    def _export_study_transcript(self, session: _Session) -> None:
        with session.lock:
            messages = [
                message_to_dict(
                    message_from_dict(r, "$", default_origin=ORIGIN_HUMAN)
                )
                for r in session.records if r["type"] == "message"
            ]
            seed_messages = [message_to_dict(m) for m in session.seed.recent_conversations]
        all_messages = seed_messages + messages
        human_turns = sum(
            1 for r in _runs_of_dicts(all_messages) if r[0] == session.human_name
        )
        row = {
            "id": session.id,
            "system": session.system,
            "model_id": session.model_id,
            "ai_role": session.agent_name,
            "human_role": session.human_name,
            "messages": all_messages,
            "human_turns": human_turns,
            "low_quality": human_turns < MIN_HUMAN_TURNS,
        }
        self._study_transcripts[row["id"]] = row
        append_jsonl(row, self._study_path("transcripts"))

    def register_study_transcript(self, row: dict) -> None:
        """Register a transcript produced outside a live session."""
        for key in ("id", "system", "ai_role", "messages"):
            if key not in row:
                raise ValueError(f"study transcript missing {key!r}")
        row.setdefault("model_id", "default")
        row.setdefault("low_quality", False)
        self._study_transcripts[row["id"]] = row
        append_jsonl(row, self._study_path("transcripts"))

    def prepare_questionnaire(self, rater_id: str) -> dict:
        """Pick two study dialogues and anonymize their roles for a rater."""
        eligible = [
            row for row in self._study_transcripts.values()
            if not row.get("low_quality")
        ]
        if len(eligible) < 2:
            raise UnknownTranscript("need at least two study transcripts")
        answered: dict[str, int] = {}
        for sub in self._submissions:
            for tid in sub["answers"]:
                answered[tid] = answered.get(tid, 0) + 1
        eligible.sort(key=lambda row: (answered.get(row["id"], 0), row["id"]))
        chosen = eligible[:2]
        questionnaire_id = uuid.uuid4().hex[:12]
        dialogues = []
        mapping = {}
        for row in chosen:
            roles = sorted({m["role"] for m in row["messages"]})
            flip = self._rng.random() < 0.5
            first, second = (roles[1], roles[0]) if flip else (roles[0], roles[1])
            rename = {first: "Role 1", second: "Role 2"}
            mapping[row["id"]] = {
                "ai_label": rename[row["ai_role"]],
                "rename": rename,
            }
            dialogues.append({
                "transcript_id": row["id"],
                "messages": [
                    {
                        "role": rename[m["role"]],
                        "content": m["content"],
                        "timestamp": m["timestamp"],
                    }
                    for m in row["messages"]
                ],
            })
        record = {
            "id": questionnaire_id,
            "rater_id": rater_id,
            "transcript_ids": [row["id"] for row in chosen],
            "mapping": mapping,
        }
        self._questionnaires[questionnaire_id] = record
        append_jsonl(record, self._study_path("questionnaires"))
        return {"questionnaire_id": questionnaire_id, "dialogues": dialogues}

    def submit_questionnaire(self, questionnaire_id: str, rater_id: str,
                             answers: dict[str, str]) -> None:
        questionnaire = self._questionnaires.get(questionnaire_id)
        if questionnaire is None:
            raise UnknownTranscript(f"no questionnaire {questionnaire_id!r}")
        expected = set(questionnaire["transcript_ids"])
        if set(answers) != expected or len(answers) != 2:
            raise UnknownTranscript(
                "answers must cover exactly the questionnaire's two transcripts"
            )
        for tid, answer in answers.items():
            if tid not in self._study_transcripts:
                raise UnknownTranscript(f"no transcript {tid!r}")
            if answer not in ("role1", "role2", "unclear"):
                raise ValueError(f"invalid answer {answer!r}")
        for sub in self._submissions:
            if sub["questionnaire_id"] == questionnaire_id and sub["rater_id"] == rater_id:
                raise DuplicateSubmission(
                    f"rater {rater_id!r} already submitted {questionnaire_id!r}"
                )
        row = {
            "questionnaire_id": questionnaire_id,
            "rater_id": rater_id,
            "answers": answers,
        }
        self._submissions.append(row)
        append_jsonl(row, self._study_path("submissions"))

    def export_tallies(self) -> list[dict]:
        """Aggregate submissions into per-(system, model) tallies."""
        groups: dict[tuple[str, str], RoleIdTally] = {}
        for sub in self._submissions:
            questionnaire = self._questionnaires.get(sub["questionnaire_id"])
            if questionnaire is None:
                continue
            for tid, answer in sub["answers"].items():
                transcript = self._study_transcripts.get(tid)
                if transcript is None:
                    continue
                ai_label = questionnaire["mapping"][tid]["ai_label"]
                if answer == "unclear":
                    outcome = "unclear"
                elif answer == ("role1" if ai_label == "Role 1" else "role2"):
                    outcome = "correct"
                else:
                    outcome = "error"
                key = (transcript["system"], transcript.get("model_id", "default"))
                groups[key] = groups.get(key, RoleIdTally()) + RoleIdTally.single(outcome)
        out = []
        for (system, model_id), tally in sorted(groups.items()):
            out.append({
                "system": system,
                "model_id": model_id,
                "n_error": tally.n_error,
                "n_unclear": tally.n_unclear,
                "n_correct": tally.n_correct,
                "n_total": tally.n_total,
                "pass_rate": pass_rate(tally),
            })
        return out


def _runs_of_dicts(messages: list[dict]) -> list[tuple[str, int]]:
    out: list[tuple[str, int]] = []
    for msg in messages:
        if out and out[-1][0] == msg["role"]:
            out[-1] = (msg["role"], out[-1][1] + 1)
        else:
            out.append((msg["role"], 1))
    return out


# --- HTTP layer ---------------------------------------------------------------

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel


class CreateSessionBody(BaseModel):
    seed_id: str
    system: str = SYSTEM_S2
    agent_character: int | None = None


class PostMessageBody(BaseModel):
    text: str


class QuestionnaireBody(BaseModel):
    questionnaire_id: str
    rater_id: str
    answers: dict[str, str]


def build_app(engine: SessionEngine):
    """Wire the engine into a FastAPI app with SSE event streams.

    CORS is wide open: the browser client is typically served from a separate
    static host during studies, and the service carries no credentials beyond
    opaque rater ids.
    """
    app = FastAPI(title="stepchat service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.engine = engine

    _STATUS = {
        UnknownSeed: 404,
        UnknownSession: 404,
        UnknownTranscript: 404,
        SessionClosed: 409,
        DuplicateSubmission: 409,
        EmptyMessage: 400,
    }

    @app.exception_handler(StepChatError)
    async def stepchat_error_handler(request: Request, exc: StepChatError):
        status = _STATUS.get(type(exc), 500)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        session_id = engine.create_session(
            body.seed_id, body.system, body.agent_character
        )
        return {"session_id": session_id}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        return engine.session_info(session_id)

    @app.get("/sessions/{session_id}/records")
    def session_records(session_id: str):
        """Full internal record log (think traces, delays) for debug tooling."""
        engine.session_info(session_id)
        return {"records": engine.all_records(session_id)}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: PostMessageBody):
        seq = engine.post_user_message(session_id, body.text)
        return {"seq": seq}

    @app.post("/sessions/{session_id}/close")
    def close_session(session_id: str):
        engine.close_session(session_id)
        return {"status": "closed"}

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str, request: Request, after: int = 0,
                      idle_timeout_s: float = 30.0):
        """Ordered SSE stream of session events.

        The stream closes after idle_timeout_s without events (or when the
        session closes); clients reconnect with Last-Event-ID or ?after= and
        receive a replay of everything they missed. Each event carries its
        sequence number as the SSE id, so reconnect replay is idempotent.
        """
        engine.session_info(session_id)  # UnknownSession -> 404 before streaming
        last_event_id = request.headers.get("last-event-id")
        if last_event_id:
            try:
                after = max(after, int(last_event_id))
            except ValueError:
                pass

        def gen():
            cursor = after
            idle_deadline = time.monotonic() + idle_timeout_s
            ping_deadline = time.monotonic() + 5.0
            while True:
                batch = engine.wait_events(session_id, cursor, timeout=0.2)
                now = time.monotonic()
                if batch:
                    idle_deadline = now + idle_timeout_s
                    for event in batch:
                        cursor = event["seq"]
                        yield (
                            f"id: {event['seq']}\n"
                            f"event: {event['type']}\n"
                            f"data: {json.dumps(event, ensure_ascii=False)}\n\n"
                        )
                    if batch[-1]["type"] == "closed":
                        return
                elif now > idle_deadline:
                    yield ": idle-timeout\n\n"
                    return
                elif now > ping_deadline:
                    ping_deadline = now + 5.0
                    yield ": ping\n\n"

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.get("/questionnaires/new")
    def new_questionnaire(rater: str):
        return engine.prepare_questionnaire(rater)

    @app.post("/questionnaires")
    def submit_questionnaire(body: QuestionnaireBody):
        engine.submit_questionnaire(body.questionnaire_id, body.rater_id, body.answers)
        return {"accepted": True}

    @app.get("/export/roleid")
    def export_roleid():
        return {"groups": engine.export_tallies()}

    return app
