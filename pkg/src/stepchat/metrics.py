"""Text and pacing metrics for step-by-step dialogues.

Tokenization everywhere is lowercase + whitespace split with no punctuation
stripping; n-grams never cross message boundaries. A "run" is a maximal
block of consecutive messages from the same role, and ACMC is the mean run
length. Reply intervals are measured between a message and the partner
message immediately before it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EmptyInput, ZeroTotal
from .types import Message

INTERVAL_BUCKET_S = 2.0
INTERVAL_MAX_S = 30.0


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def distinct_n(messages: list[Message], n: int) -> float:
    """Unique n-grams over total n-grams, pooled across messages."""
    if n < 1:
        raise ValueError("n must be at least 1")
    total = 0
    unique: set[tuple[str, ...]] = set()
    for msg in messages:
        tokens = tokenize(msg.content)
        for i in range(len(tokens) - n + 1):
            unique.add(tuple(tokens[i:i + n]))
            total += 1
    return len(unique) / total if total else 0.0


def words_per_message(messages: list[Message]) -> float:
    if not messages:
        raise EmptyInput("words_per_message needs at least one message")
    return sum(len(tokenize(m.content)) for m in messages) / len(messages)


def runs(messages: list[Message]) -> list[tuple[str, int]]:
    """Maximal same-role runs as (role, length) pairs, in order."""
    out: list[tuple[str, int]] = []
    for msg in messages:
        if out and out[-1][0] == msg.role:
            out[-1] = (msg.role, out[-1][1] + 1)
        else:
            out.append((msg.role, 1))
    return out


def acmc(messages: list[Message]) -> float:
    """Average consecutive message count: total messages over number of runs."""
    if not messages:
        raise EmptyInput("acmc needs at least one message")
    return len(messages) / len(runs(messages))


def run_distribution(messages: list[Message]) -> dict[int, float]:
    """Proportion of runs at each length."""
    lengths = [length for _, length in runs(messages)]
    if not lengths:
        return {}
    counts: dict[int, int] = {}
    for length in lengths:
        counts[length] = counts.get(length, 0) + 1
    return {length: counts[length] / len(lengths) for length in sorted(counts)}


def reply_intervals(messages: list[Message]) -> list[float]:
    """Latencies between a message and the partner message right before it."""
    out = []
    for prev, cur in zip(messages, messages[1:]):
        if cur.role != prev.role:
            out.append(cur.timestamp - prev.timestamp)
    return out


def interval_bucket(interval_s: float, bucket_s: float = INTERVAL_BUCKET_S,
                    max_s: float = INTERVAL_MAX_S) -> float:
    """Lower bound of the histogram bucket holding the interval."""
    if interval_s >= max_s:
        return max_s
    return int(interval_s // bucket_s) * bucket_s


def interval_distribution(messages: list[Message],
                          bucket_s: float = INTERVAL_BUCKET_S,
                          max_s: float = INTERVAL_MAX_S) -> dict[float, float]:
    """Normalized reply-latency histogram; the max_s key pools the overflow."""
    intervals = reply_intervals(messages)
    if not intervals:
        return {}
    counts: dict[float, int] = {}
    for interval in intervals:
        key = interval_bucket(interval, bucket_s, max_s)
        counts[key] = counts.get(key, 0) + 1
    return {key: counts[key] / len(intervals) for key in sorted(counts)}


@dataclass(frozen=True)
class RoleIdTally:
    """Counts from role-identification judgments."""

    n_error: int = 0
    n_unclear: int = 0
    n_correct: int = 0
    n_total: int = 0

    def __post_init__(self):
        if min(self.n_error, self.n_unclear, self.n_correct, self.n_total) < 0:
            raise ValueError("tally counts must be non-negative")
        if self.n_error + self.n_unclear + self.n_correct != self.n_total:
            raise ValueError("tally counts must sum to n_total")

    def __add__(self, other: "RoleIdTally") -> "RoleIdTally":
        return RoleIdTally(
            n_error=self.n_error + other.n_error,
            n_unclear=self.n_unclear + other.n_unclear,
            n_correct=self.n_correct + other.n_correct,
            n_total=self.n_total + other.n_total,
        )

    @classmethod
    def single(cls, outcome: str) -> "RoleIdTally":
        if outcome not in ("error", "unclear", "correct"):
            raise ValueError(f"unknown outcome {outcome!r}")
        return cls(
            n_error=int(outcome == "error"),
            n_unclear=int(outcome == "unclear"),
            n_correct=int(outcome == "correct"),
            n_total=1,
        )


def pass_rate(tally: RoleIdTally) -> float:
    """Fraction of judgments that were wrong or unclear (higher = more human-like)."""
    if tally.n_total == 0:
        raise ZeroTotal("pass rate undefined for an empty tally")
    return (tally.n_error + tally.n_unclear) / tally.n_total


@dataclass
class SideStats:
    """Per-role or per-origin slice of the report."""

    message_count: int
    words_per_message: float
    acmc: float


@dataclass
class MetricsReport:
    distinct_n: dict[int, float]
    words_per_message: float
    acmc: float
    run_histogram: dict[int, float]
    interval_histogram: dict[float, float]
    per_role: dict[str, SideStats] = field(default_factory=dict)
    per_origin: dict[str, SideStats] = field(default_factory=dict)
    message_count: int = 0
    transcript_count: int = 0

    def to_dict(self) -> dict:
        return {
            "distinct_n": {str(n): v for n, v in self.distinct_n.items()},
            "words_per_message": self.words_per_message,
            "acmc": self.acmc,
            "run_histogram": {str(k): v for k, v in self.run_histogram.items()},
            "interval_histogram": {str(k): v for k, v in self.interval_histogram.items()},
            "per_role": {
                role: vars(stats) for role, stats in self.per_role.items()
            },
            "per_origin": {
                origin: vars(stats) for origin, stats in self.per_origin.items()
            },
            "message_count": self.message_count,
            "transcript_count": self.transcript_count,
        }


def _side_stats(sequences: list[list[Message]], key) -> dict[str, SideStats]:
    """Slice pooled run/word stats by a message attribute (role or origin)."""
    by_key: dict[str, list[Message]] = {}
    run_lengths: dict[str, list[int]] = {}
    for seq in sequences:
        for msg in seq:
            by_key.setdefault(key(msg), []).append(msg)
        for msg_key, length in _runs_by(seq, key):
            run_lengths.setdefault(msg_key, []).append(length)
    out = {}
    for k, msgs in sorted(by_key.items()):
        lengths = run_lengths.get(k, [])
        out[k] = SideStats(
            message_count=len(msgs),
            words_per_message=sum(len(tokenize(m.content)) for m in msgs) / len(msgs),
            acmc=(sum(lengths) / len(lengths)) if lengths else 0.0,
        )
    return out


def _runs_by(messages: list[Message], key) -> list[tuple[str, int]]:
    out: list[tuple[str, int]] = []
    for msg in messages:
        k = key(msg)
        if out and out[-1][0] == k:
            out[-1] = (k, out[-1][1] + 1)
        else:
            out.append((k, 1))
    return out


def compute_report(message_sequences: list[list[Message]],
                   ns: tuple[int, ...] = (2, 3, 4, 5, 6)) -> MetricsReport:
    """Pooled metrics over several message sequences.

    Runs and intervals never cross sequence boundaries; n-gram pools and
    word counts aggregate over everything.
    """
    pooled = [m for seq in message_sequences for m in seq]
    if not pooled:
        raise EmptyInput("compute_report needs at least one message")

    all_runs = [length for seq in message_sequences for _, length in runs(seq)]
    run_counts: dict[int, int] = {}
    for length in all_runs:
        run_counts[length] = run_counts.get(length, 0) + 1
    intervals = [iv for seq in message_sequences for iv in reply_intervals(seq)]
    interval_counts: dict[float, int] = {}
    for interval in intervals:
        key = interval_bucket(interval)
        interval_counts[key] = interval_counts.get(key, 0) + 1

    return MetricsReport(
        distinct_n={n: distinct_n(pooled, n) for n in ns},
        words_per_message=words_per_message(pooled),
        acmc=len(pooled) / len(all_runs),
        run_histogram={k: run_counts[k] / len(all_runs) for k in sorted(run_counts)},
        interval_histogram={
            k: interval_counts[k] / len(intervals) for k in sorted(interval_counts)
        } if intervals else {},
        per_role=_side_stats(message_sequences, key=lambda m: m.role),
        per_origin=_side_stats(message_sequences, key=lambda m: m.origin),
        message_count=len(pooled),
        transcript_count=len(message_sequences),
    )
