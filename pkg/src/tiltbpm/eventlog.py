"""Transparency event logs: JSON-lines ingestion, trace grouping, XES export."""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, time, timezone
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, NamedTuple

from lxml import etree

from .errors import IngestError, MalformedLine, MissingRequiredKey
from .tilt import DataDisclosed

EID_KEY = "ident:eid"
TIMESTAMP_KEY = "time:timestamp"
CASE_KEY = "case:concept:name"
ACTIVITY_KEY = "concept:name"
CATEGORIES_KEY = "tilt:categories"
PURPOSES_KEY = "tilt:purposes"
LEGAL_BASES_KEY = "tilt:legalBases"
RECIPIENTS_KEY = "tilt:recipients"
STORAGE_KEY = "tilt:storage"

REQUIRED_KEYS = (CASE_KEY, ACTIVITY_KEY, TIMESTAMP_KEY)
LIST_KEYS = (CATEGORIES_KEY, PURPOSES_KEY, LEGAL_BASES_KEY, RECIPIENTS_KEY, STORAGE_KEY)

_DATE_PREFIX = re.compile(r"^\d{4}-\d{2}-\d{2}")
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
XES_NS = "http://www.xes-standard.org/"


def normalize_label(label: str) -> str:
    """Join key between log and model labels: NFC plus outer whitespace trim."""
    return unicodedata.normalize("NFC", label).strip()


def parse_timestamp(raw: str) -> datetime:
    """ISO-8601 instant, date part optional.  Result is timezone-aware UTC."""
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    if not _DATE_PREFIX.match(text):
        t = time.fromisoformat(text)
        stamp = datetime.combine(EPOCH.date(), t.replace(tzinfo=None), tzinfo=t.tzinfo or timezone.utc)
    else:
        stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def format_timestamp(stamp: datetime) -> str:
    stamp = stamp.astimezone(timezone.utc)
    return stamp.strftime("%Y-%m-%dT%H:%M:%S.") + f"{stamp.microsecond // 1000:03d}Z"


@dataclass(frozen=True)
class Disclosure:
    categories: tuple[str, ...] = ()
    purposes: tuple[str, ...] = ()
    legal_bases: tuple[str, ...] = ()
    recipients: tuple[str, ...] = ()
    storage: tuple[str, ...] = ()


@dataclass(frozen=True)
class TransparencyEvent:
    eid: int
    timestamp: datetime
    case_id: str
    activity: str
    disclosed: Disclosure = field(default_factory=Disclosure)

    def __post_init__(self):
        object.__setattr__(self, "activity", normalize_label(self.activity))
        if not self.activity:
            raise ValueError("activity must be non-empty")

    def to_json(self) -> dict[str, Any]:
        d = self.disclosed
        out: dict[str, Any] = {
            EID_KEY: self.eid,
            TIMESTAMP_KEY: format_timestamp(self.timestamp),
            CASE_KEY: self.case_id,
            ACTIVITY_KEY: self.activity,
            CATEGORIES_KEY: list(d.categories),
            PURPOSES_KEY: list(d.purposes),
            LEGAL_BASES_KEY: list(d.legal_bases),
        }
        if d.recipients:
            out[RECIPIENTS_KEY] = list(d.recipients)
        if d.storage:
            out[STORAGE_KEY] = list(d.storage)
        return out

    def to_line(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False)


def _order(event: TransparencyEvent) -> tuple:
    return (event.timestamp, event.eid)


@dataclass(frozen=True)
class EventLog:
    traces: Mapping[str, tuple[TransparencyEvent, ...]] = field(default_factory=dict)

    @property
    def activity_alphabet(self) -> frozenset[str]:
        return frozenset(e.activity for trace in self.traces.values() for e in trace)

    def __len__(self) -> int:
        return sum(len(t) for t in self.traces.values())

    def events(self) -> Iterator[TransparencyEvent]:
        for trace in self.traces.values():
            yield from trace

    def activity_traces(self) -> list[tuple[str, ...]]:
        return [tuple(e.activity for e in trace) for trace in self.traces.values()]

    @classmethod
    def from_events(cls, events: Iterable[TransparencyEvent]) -> EventLog:
        grouped: dict[str, list[TransparencyEvent]] = {}
        for ev in events:
            grouped.setdefault(ev.case_id, []).append(ev)
        return cls({case: tuple(sorted(grouped[case], key=_order)) for case in sorted(grouped)})


class IngestResult(NamedTuple):
    log: EventLog
    rejects: list[IngestError]


def _string_list(record: Mapping[str, Any], key: str, line_no: int) -> tuple[str, ...]:
    value = record.get(key, [])
    if value is None:
        return ()
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise MalformedLine(line_no, f"{key} must be a list of strings")
    items = tuple(v.strip() for v in value)
    if any(not v for v in items):
        raise MalformedLine(line_no, f"{key} contains an empty entry")
    return items


def decode_event(record: Any, line_no: int, default_eid: int) -> TransparencyEvent:
    if not isinstance(record, dict):
        raise MalformedLine(line_no, "line is not a JSON object")
    for key in REQUIRED_KEYS:
        if key not in record:
            raise MissingRequiredKey(line_no, key)
    case_id, activity, raw_ts = record[CASE_KEY], record[ACTIVITY_KEY], record[TIMESTAMP_KEY]
    if not isinstance(case_id, str) or not case_id:
        raise MalformedLine(line_no, f"{CASE_KEY} must be a non-empty string")
    if not isinstance(activity, str) or not normalize_label(activity):
        raise MalformedLine(line_no, f"{ACTIVITY_KEY} must be a non-empty string")
    if not isinstance(raw_ts, str):
        raise MalformedLine(line_no, f"{TIMESTAMP_KEY} must be a string")
    try:
        stamp = parse_timestamp(raw_ts)
    except ValueError:
        raise MalformedLine(line_no, f"unparseable timestamp {raw_ts!r}") from None
    eid = record.get(EID_KEY, default_eid)
    if isinstance(eid, bool) or not isinstance(eid, int):
        raise MalformedLine(line_no, f"{EID_KEY} must be an integer")
    disclosed = Disclosure(*(_string_list(record, k, line_no) for k in LIST_KEYS))
    return TransparencyEvent(eid, stamp, case_id, activity, disclosed)


def ingest(lines: Iterable[str], strict: bool = False) -> IngestResult:
    """Decode JSON lines into an EventLog.

    Blank lines and lines starting with ``#`` are skipped.  Bad lines are
    collected in ``rejects`` (1-based line numbers) unless ``strict`` is set,
    in which case the first one is raised.
    """
    accepted: list[TransparencyEvent] = []
    rejects: list[IngestError] = []
    next_eid = 0
    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        try:
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, f"invalid JSON: {exc.msg}") from None
            event = decode_event(record, line_no, next_eid)
        except IngestError as exc:
            if strict:
                raise
            rejects.append(exc)
            continue
        next_eid = max(next_eid, event.eid + 1)
        accepted.append(event)
    return IngestResult(EventLog.from_events(accepted), rejects)


def read_log(path: str | Path, strict: bool = False) -> IngestResult:
    with open(path, encoding="utf-8") as fh:
        return ingest(fh, strict=strict)


def flatten_disclosed(event: TransparencyEvent) -> list[DataDisclosed]:
    """One DataDisclosed per category, each with the event's full attribute sets."""
    d = event.disclosed
    return [
        DataDisclosed(
            id=category,
            category=category,
            purposes=d.purposes,
            legal_bases=d.legal_bases,
            recipients=d.recipients,
            storage=d.storage,
        )
        for category in d.categories
    ]


def to_xes(log: EventLog) -> str:
    """Control-flow projection as XES; tilt lists become list attributes."""
    E = lambda tag, **attrs: etree.Element(f"{{{XES_NS}}}{tag}", attrs)  # noqa: E731
    root = etree.Element(f"{{{XES_NS}}}log", nsmap={None: XES_NS})
    root.set("xes.version", "1.0")
    for name, prefix, uri in (
        ("Concept", "concept", "http://www.xes-standard.org/concept.xesext"),
        ("Time", "time", "http://www.xes-standard.org/time.xesext"),
        ("Identity", "ident", "http://www.xes-standard.org/identity.xesext"),
    ):
        root.append(E("extension", name=name, prefix=prefix, uri=uri))
    for case_id, trace in log.traces.items():
        t = etree.SubElement(root, f"{{{XES_NS}}}trace")
        t.append(E("string", key="concept:name", value=case_id))
        for ev in trace:
            e = etree.SubElement(t, f"{{{XES_NS}}}event")
            e.append(E("int", key=EID_KEY, value=str(ev.eid)))
            e.append(E("string", key=ACTIVITY_KEY, value=ev.activity))
            e.append(E("date", key=TIMESTAMP_KEY, value=format_timestamp(ev.timestamp)))
            for key, values in zip(LIST_KEYS, (
                ev.disclosed.categories, ev.disclosed.purposes, ev.disclosed.legal_bases,
                ev.disclosed.recipients, ev.disclosed.storage,
            )):
                lst = etree.SubElement(e, f"{{{XES_NS}}}list", key=key)
                vals = etree.SubElement(lst, f"{{{XES_NS}}}values")
                for v in values:
                    vals.append(E("string", key=key, value=v))
    return etree.tostring(root, pretty_print=True, xml_declaration=True,
                          encoding="UTF-8").decode("utf-8")
