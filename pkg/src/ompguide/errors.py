"""Exception hierarchy.

Validation-type failures derive from ``OmpGuideError``; transport failures
from ``TransportError`` so the CLI can map them to distinct exit codes.
"""


class OmpGuideError(Exception):
    """Base class for all errors raised by this package."""


class MalformedDirective(OmpGuideError):
    pass


class DegenerateInput(OmpGuideError):
    pass


class UnknownSample(OmpGuideError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class UnsupportedLoop(OmpGuideError):
    pass


class NotParallel(OmpGuideError):
    pass


class SchemaError(OmpGuideError):
    def __init__(self, message: str, sample_id: str | None = None, field: str | None = None):
        self.sample_id = sample_id
        self.field = field
        where = []
        if sample_id is not None:
            where.append(f"sample {sample_id!r}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class MissingRecord(OmpGuideError):
    pass


class IoFailure(OmpGuideError):
    pass


class GenerationError(OmpGuideError):
    """Base for failures while obtaining a model response."""


class ReplayMiss(GenerationError):
    def __init__(self, prompt_hash: str, directory: str):
        self.prompt_hash = prompt_hash
        super().__init__(f"no replay entry {prompt_hash}.json in {directory}")


class ApiError(GenerationError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"HTTP {status}: {body[:500]}")


class TransportError(GenerationError):
    pass
