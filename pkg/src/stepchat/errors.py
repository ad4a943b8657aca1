"""Exception hierarchy shared across the package.

Every error raised by stepchat code derives from StepChatError so callers
can catch the whole family with one clause. Backend-transport failures get
their own intermediate base (BackendError) because several operations are
contractually required to survive them.
"""


class StepChatError(Exception):
    """Base class for all stepchat errors."""


class MalformedOutput(StepChatError):
    """Model output did not match the think/response/wait tag grammar."""


class SchemaError(StepChatError):
    """A JSON document violated the transcript/seed schema.

    The message contains the JSON path of the offending field, e.g. "$.topic".
    """

    def __init__(self, path: str, detail: str = ""):
        self.path = path
        self.detail = detail
        super().__init__(f"{path}: {detail}" if detail else path)


class JsonParseError(StepChatError):
    """Model output that should have been JSON could not be parsed."""


class EmptyContext(StepChatError):
    """Agent prompt requested with no history and no summary to render."""


class EmptyInput(StepChatError):
    """A metric was asked to aggregate over zero messages."""


class ZeroTotal(StepChatError):
    """Pass rate requested for a tally with no judgments."""


class BackendError(StepChatError):
    """Base class for chat-backend failures."""


class TransportError(BackendError):
    """Remote call failed after exhausting the retry budget."""


class AuthError(BackendError):
    """Remote endpoint rejected the credential."""


class QueueExhausted(BackendError):
    """A scripted backend ran out of canned replies."""


class CardinalityError(StepChatError):
    """A clustering stage returned the wrong number of topic names."""


class CoverageError(StepChatError):
    """A topic assignment missed, duplicated, or mislabeled a seed id."""


class ScoreParseError(StepChatError):
    """A judge reply did not contain valid 0-100 dimension scores."""


class AnswerParseError(StepChatError):
    """A role-identification reply had no parseable answer tag."""


class UnknownSeed(StepChatError):
    """Session creation referenced a seed id absent from the corpus store."""


class SessionClosed(StepChatError):
    """Operation attempted on a closed session."""


class EmptyMessage(StepChatError):
    """User message with no content after trimming."""


class UnknownSession(StepChatError):
    """Event stream or message post referenced a session that does not exist."""


class UnknownTranscript(StepChatError):
    """Questionnaire referenced a transcript id absent from the study store."""


class DuplicateSubmission(StepChatError):
    """Same rater submitted the same questionnaire twice."""


class DuetError(StepChatError):
    """A dual-agent run failed; carries the partial transcript for debugging."""

    def __init__(self, message: str, transcript=None):
        self.transcript = transcript
        super().__init__(message)
