"""Exception types shared across the pipeline."""


class EventRetrievalError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(EventRetrievalError):
    """A line-delimited record could not be parsed; carries the line number."""

    def __init__(self, path, line_no, reason):
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{self.path}:{line_no}: {reason}")


class DuplicateId(EventRetrievalError):
    """Two records claim the same identifier."""


class DanglingReference(EventRetrievalError):
    """A record references an id that does not resolve."""


class AgentUnavailable(EventRetrievalError):
    """A remote agent could not be reached or timed out."""


class MalformedAgentReply(EventRetrievalError):
    """An agent answered, but not in the expected schema."""


class ExtractionFailed(EventRetrievalError):
    """No agent produced a usable response for a document."""


class InvalidTaxonomy(EventRetrievalError):
    """The taxonomy file violates the tree invariants."""


class NotFound(EventRetrievalError):
    """Lookup of a named entity (node, document) failed."""


class MissingIdentifier(EventRetrievalError):
    """A training unit's document has no identifier in the index."""


class DivergenceError(EventRetrievalError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, batch, value):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}, batch {batch}")


class InternalInvariantViolation(EventRetrievalError):
    """A structure that is guaranteed by construction was found broken."""


class ConfigError(EventRetrievalError):
    """The pipeline configuration is invalid or incomplete."""
