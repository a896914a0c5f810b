class GeeError(Exception):
    """Base class for every error raised by the graph encoder."""


class GraphParseError(GeeError):
    """A graph or label file line could not be parsed."""

    def __init__(self, path, line_number, line, reason='malformed line'):
        self.path = path
        self.line_number = line_number
        self.line = line
        super().__init__(f"{path}:{line_number}: {reason}: {line!r}")


class GraphDomainError(GeeError):
    """Vertex ids, sizes or probabilities outside their allowed range."""


class LabelConfigError(GeeError):
    """The label vector cannot be used for encoding (e.g. an empty class)."""


class ModelSpecError(GeeError):
    """A random-graph model document is invalid or unsupported."""


class EvalConfigError(GeeError):
    """Cross-validation or classifier configuration is unusable."""


class BootstrapError(GeeError):
    """Graph bootstrap preconditions are not met."""


# errors caused by bad input; the CLI exits with code 2 on these
VALIDATION_ERRORS = (
    GraphParseError,
    GraphDomainError,
    LabelConfigError,
    ModelSpecError,
    EvalConfigError,
    BootstrapError,
    FileNotFoundError,
)
