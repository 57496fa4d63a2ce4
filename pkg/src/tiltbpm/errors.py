"""Exception hierarchy shared by all tiltbpm modules."""

from __future__ import annotations


class TiltBpmError(Exception):
    """Base class for every error raised by this package."""


class MalformedXml(TiltBpmError):
    pass


class SchemaViolation(TiltBpmError):
    pass


class UnknownTiltField(SchemaViolation):
    def __init__(self, tag: str, element_id: str | None = None):
        self.tag = tag
        self.element_id = element_id
        where = f" on {element_id!r}" if element_id else ""
        super().__init__(f"unknown TILT field <tilt:{tag}>{where}")


class PlacementViolation(TiltBpmError):
    pass


class MissingMeta(TiltBpmError):
    pass


class ConflictingFix(TiltBpmError):
    pass


class DuplicateRuleId(TiltBpmError):
    pass


class IngestError(TiltBpmError):
    """A rejected event-log line. Collected by ``ingest`` unless ``strict``."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class MalformedLine(IngestError):
    pass


class MissingRequiredKey(IngestError):
    def __init__(self, line_no: int, key: str):
        self.key = key
        super().__init__(line_no, f"missing required key {key!r}")


class EmptyLog(TiltBpmError):
    pass


class UnknownActivity(TiltBpmError):
    pass


class UnsoundModel(TiltBpmError):
    pass
