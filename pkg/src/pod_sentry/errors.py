"""Exception types shared across the toolkit."""


class PodSentryError(Exception):
    """Base class for all toolkit errors."""


class ConventionMismatchError(PodSentryError):
    """Boxes in different coordinate conventions were combined.

    Callers must convert everything to one convention before doing geometry.
    """


class UndefinedMetricError(PodSentryError):
    """A metric's denominator is zero; the value is undefined, never a silent 0."""


class ParseError(PodSentryError):
    """Malformed input text or document.

    ``location`` pins the failure to a position a human can find: a 1-based
    line number, an element path, or a record index.
    """

    def __init__(self, message: str, *, location: str | None = None, source: str | None = None):
        self.location = location
        self.source = source
        parts = []
        if source:
            parts.append(source)
        if location:
            parts.append(location)
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class SchemaError(ParseError):
    """A schema-tagged document violates its declared schema."""


class UnknownClassError(PodSentryError):
    """A class id or name is not present in the registry or knowledge base."""


class EvaluationInputError(PodSentryError):
    """Evaluation inputs are inconsistent (e.g. detection for an unknown image)."""


class BackendError(PodSentryError):
    """An inference backend failed to produce detections."""


class BackendTransportError(BackendError):
    """The external backend could not be reached; distinct from an empty result."""
