"""TILT transparency fields, their payload records, and placement rules.

Each payload is a frozen dataclass whose fields carry a small codec spec in
their metadata: scalars become XML attributes, nested records become nested
``tilt:*`` children and lists become repeated ``tilt:*`` children with text
content.  The same spec drives the JSON form used by the TILT export.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from lxml import etree

from .errors import PlacementViolation, SchemaViolation, UnknownTiltField
from .model import TILT_NS, BpmnElement, BpmnModel, DiagramKind, ElementClass, Flow, FlowKind


class TiltFieldKind(enum.Enum):
    META = "meta"
    CONTROLLER = "controller"
    DATA_PROTECTION_OFFICER = "dataProtectionOfficer"
    DATA_DISCLOSED = "dataDisclosed"
    THIRD_COUNTRY_TRANSFERS = "thirdCountryTransfers"
    ACCESS_AND_DATA_PORTABILITY = "accessAndDataPortability"
    SOURCES = "sources"
    RIGHT_TO_INFORMATION = "rightToInformation"
    RIGHT_TO_RECTIFICATION_OR_DELETION = "rightToRectificationOrDeletion"
    RIGHT_TO_DATA_PORTABILITY = "rightToDataPortability"
    RIGHT_TO_WITHDRAW_CONSENT = "rightToWithdrawConsent"
    RIGHT_TO_COMPLAIN = "rightToComplain"
    AUTOMATED_DECISION_MAKING = "automatedDecisionMaking"
    CHANGES_OF_PURPOSE = "changesOfPurpose"


class TiltColumn(enum.Enum):
    """The ten columns of the BPMN/TILT mapping; RIGHTS groups five kinds."""

    META = "meta"
    CONTROLLER = "controller"
    DATA_PROTECTION_OFFICER = "dataProtectionOfficer"
    DATA_DISCLOSED = "dataDisclosed"
    THIRD_COUNTRY_TRANSFERS = "thirdCountryTransfers"
    ACCESS_AND_DATA_PORTABILITY = "accessAndDataPortability"
    SOURCES = "sources"
    RIGHTS = "rightTo{inf, del, por, con, com}"
    AUTOMATED_DECISION_MAKING = "automatedDecisionMaking"
    CHANGES_OF_PURPOSE = "changesOfPurpose"

    @property
    def kinds(self) -> tuple[TiltFieldKind, ...]:
        if self is TiltColumn.RIGHTS:
            return RIGHT_KINDS
        return (TiltFieldKind(self.value),)


RIGHT_KINDS = (
    TiltFieldKind.RIGHT_TO_INFORMATION,
    TiltFieldKind.RIGHT_TO_RECTIFICATION_OR_DELETION,
    TiltFieldKind.RIGHT_TO_DATA_PORTABILITY,
    TiltFieldKind.RIGHT_TO_WITHDRAW_CONSENT,
    TiltFieldKind.RIGHT_TO_COMPLAIN,
)


def column_of(kind: TiltFieldKind) -> TiltColumn:
    if kind in RIGHT_KINDS:
        return TiltColumn.RIGHTS
    return TiltColumn(kind.value)


class Origin(enum.Enum):
    MANUAL = "manual"
    AUTO_FILLED = "auto"


# -- placement matrix ----------------------------------------------------------
# Columns in TiltColumn order.  X: any diagram, P: process only,
# C: collaboration only, -: never.
_MATRIX_ROWS: Mapping[ElementClass, str] = {
    ElementClass.ACTIVITY:              "---X----X-",
    ElementClass.START_EVENT:           "XPP-------",
    ElementClass.END_EVENT:             "-----X-X-X",
    ElementClass.GATEWAY:               "--------X-",
    ElementClass.DATA_STORE_REFERENCE:  "------X---",
    ElementClass.DATA_OBJECT_REFERENCE: "---X------",
    ElementClass.MESSAGE_FLOW:          "----X-----",
    ElementClass.PARTICIPANT:           "-CC---C---",
    ElementClass.LANE:                  "--C-------",
}


def placement_mark(element_class: ElementClass, column: TiltColumn) -> str:
    return _MATRIX_ROWS[element_class][list(TiltColumn).index(column)]


def allowed_columns(element_class: ElementClass, diagram_kind: DiagramKind) -> set[TiltColumn]:
    ok = {"X", "P"} if diagram_kind is DiagramKind.PROCESS else {"X", "C"}
    return {col for col in TiltColumn if placement_mark(element_class, col) in ok}


def allowed_fields(element_class: ElementClass, diagram_kind: DiagramKind) -> set[TiltFieldKind]:
    """Field kinds that may be attached to ``element_class`` in ``diagram_kind``."""
    return {k for col in allowed_columns(element_class, diagram_kind) for k in col.kinds}


def placement_class(item: BpmnElement | Flow) -> ElementClass | None:
    """Matrix row for an element or flow; None for flows outside the matrix."""
    if isinstance(item, BpmnElement):
        return item.element_class
    if item.kind is FlowKind.MESSAGE_FLOW:
        return ElementClass.MESSAGE_FLOW
    return None


def is_allowed(item: BpmnElement | Flow, kind: TiltFieldKind, diagram_kind: DiagramKind) -> bool:
    cls = placement_class(item)
    return cls is not None and kind in allowed_fields(cls, diagram_kind)


# -- payload codec specs ------------------------------------------------------

def _attr(name: str, conv: type = str) -> dict[str, Any]:
    return {"codec": "attr", "name": name, "conv": conv}


def _child(name: str) -> dict[str, Any]:
    return {"codec": "child", "name": name}


def _list(name: str, item_tag: str) -> dict[str, Any]:
    return {"codec": "list", "name": name, "item": item_tag}


@dataclass(frozen=True)
class Representative:
    name: str = field(metadata=_attr("name"))
    email: str | None = field(default=None, metadata=_attr("email"))


@dataclass(frozen=True)
class Controller:
    name: str = field(metadata=_attr("name"))
    division: str | None = field(default=None, metadata=_attr("division"))
    country: str | None = field(default=None, metadata=_attr("country"))
    representative: Representative | None = field(default=None, metadata=_child("representative"))


@dataclass(frozen=True)
class DataProtectionOfficer:
    name: str = field(metadata=_attr("name"))
    email: str | None = field(default=None, metadata=_attr("email"))
    country: str | None = field(default=None, metadata=_attr("country"))


@dataclass(frozen=True)
class Meta:
    name: str = field(metadata=_attr("name"))
    created: str | None = field(default=None, metadata=_attr("created"))
    modified: str | None = field(default=None, metadata=_attr("modified"))
    version: int | None = field(default=None, metadata=_attr("version", int))


@dataclass(frozen=True)
class DataDisclosed:
    id: str = field(metadata=_attr("id"))
    category: str = field(metadata=_attr("category"))
    purposes: tuple[str, ...] = field(default=(), metadata=_list("purposes", "purpose"))
    legal_bases: tuple[str, ...] = field(default=(), metadata=_list("legalBases", "legalBasis"))
    recipients: tuple[str, ...] = field(default=(), metadata=_list("recipients", "recipient"))
    storage: tuple[str, ...] = field(default=(), metadata=_list("storage", "storage"))

    def __post_init__(self):
        if not self.category or not self.category.strip():
            raise SchemaViolation("dataDisclosed category must be non-empty")
        bases = tuple(b.strip() for b in self.legal_bases)
        if any(not b for b in bases):
            raise SchemaViolation(f"dataDisclosed {self.id!r}: empty legal basis")
        object.__setattr__(self, "legal_bases", bases)
        for name in ("purposes", "recipients", "storage"):
            object.__setattr__(self, name, tuple(getattr(self, name)))


@dataclass(frozen=True)
class ThirdCountryTransfer:
    country: str = field(metadata=_attr("country"))
    adequacy_decision: bool | None = field(default=None, metadata=_attr("adequacyDecision", bool))
    safeguards: str | None = field(default=None, metadata=_attr("safeguards"))


@dataclass(frozen=True)
class Source:
    description: str = field(metadata=_attr("description"))
    url: str | None = field(default=None, metadata=_attr("url"))


@dataclass(frozen=True)
class AccessAndDataPortability:
    available: bool = field(metadata=_attr("available", bool))
    description: str | None = field(default=None, metadata=_attr("description"))


@dataclass(frozen=True)
class Right:
    description: str = field(metadata=_attr("description"))
    contact: str | None = field(default=None, metadata=_attr("contact"))


@dataclass(frozen=True)
class AutomatedDecisionMaking:
    in_use: bool = field(metadata=_attr("inUse", bool))
    logic_involved: str | None = field(default=None, metadata=_attr("logicInvolved"))


@dataclass(frozen=True)
class ChangesOfPurpose:
    description: str = field(metadata=_attr("description"))
    affected_data_categories: tuple[str, ...] = field(
        default=(), metadata=_list("affectedDataCategories", "affectedDataCategory")
    )

    def __post_init__(self):
        object.__setattr__(self, "affected_data_categories", tuple(self.affected_data_categories))


PAYLOAD_TYPES: Mapping[TiltFieldKind, type] = {
    TiltFieldKind.META: Meta,
    TiltFieldKind.CONTROLLER: Controller,
    TiltFieldKind.DATA_PROTECTION_OFFICER: DataProtectionOfficer,
    TiltFieldKind.DATA_DISCLOSED: DataDisclosed,
    TiltFieldKind.THIRD_COUNTRY_TRANSFERS: ThirdCountryTransfer,
    TiltFieldKind.ACCESS_AND_DATA_PORTABILITY: AccessAndDataPortability,
    TiltFieldKind.SOURCES: Source,
    **{k: Right for k in RIGHT_KINDS},
    TiltFieldKind.AUTOMATED_DECISION_MAKING: AutomatedDecisionMaking,
    TiltFieldKind.CHANGES_OF_PURPOSE: ChangesOfPurpose,
}

_NESTED_TYPES: Mapping[str, type] = {"representative": Representative}

ORIGIN_ATTR = "origin"


@dataclass(frozen=True)
class TiltAnnotation:
    field: TiltFieldKind
    payload: Any
    origin: Origin = Origin.MANUAL

    def __post_init__(self):
        expected = PAYLOAD_TYPES[self.field]
        if not isinstance(self.payload, expected):
            raise SchemaViolation(
                f"{self.field.value} expects {expected.__name__}, "
                f"got {type(self.payload).__name__}"
            )


# -- XML ------------------------------------------------------------------------

def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _parse_scalar(raw: str, conv: type, where: str) -> Any:
    if conv is bool:
        if raw not in ("true", "false"):
            raise SchemaViolation(f"{where}: expected true/false, got {raw!r}")
        return raw == "true"
    if conv is int:
        try:
            return int(raw)
        except ValueError:
            raise SchemaViolation(f"{where}: expected an integer, got {raw!r}") from None
    return raw


def _encode_record(record: Any, tag: str) -> etree._Element:
    el = etree.Element(f"{{{TILT_NS}}}{tag}")
    for f in dataclasses.fields(record):
        spec, value = f.metadata, getattr(record, f.name)
        if value is None:
            continue
        if spec["codec"] == "attr":
            el.set(spec["name"], _fmt(value))
        elif spec["codec"] == "child":
            el.append(_encode_record(value, spec["name"]))
        else:
            for item in value:
                etree.SubElement(el, f"{{{TILT_NS}}}{spec['item']}").text = item
    return el


def _decode_record(cls: type, el: etree._Element, where: str) -> Any:
    kwargs: dict[str, Any] = {}
    by_item: dict[str, dataclasses.Field] = {}
    for f in dataclasses.fields(cls):
        spec = f.metadata
        if spec["codec"] == "attr":
            raw = el.get(spec["name"])
            if raw is not None:
                kwargs[f.name] = _parse_scalar(raw, spec["conv"], where)
            elif f.default is dataclasses.MISSING and not (f.name == "id" and cls is DataDisclosed):
                raise SchemaViolation(f"{where}: missing attribute {spec['name']!r}")
        elif spec["codec"] == "child":
            by_item[spec["name"]] = f
        else:
            by_item[spec["item"]] = f
            kwargs[f.name] = []
    for child in el:
        if not isinstance(child.tag, str):
            continue
        q = etree.QName(child)
        f = by_item.get(q.localname) if q.namespace == TILT_NS else None
        if f is None:
            raise SchemaViolation(f"{where}: unexpected child <{q.localname}>")
        if f.metadata["codec"] == "child":
            kwargs[f.name] = _decode_record(_NESTED_TYPES[q.localname], child, where)
        else:
            kwargs[f.name].append((child.text or "").strip())
    if cls is DataDisclosed and "id" not in kwargs:
        kwargs["id"] = kwargs.get("category", "")
    for name, value in list(kwargs.items()):
        if isinstance(value, list):
            kwargs[name] = tuple(value)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise SchemaViolation(f"{where}: {exc}") from None


def annotation_to_xml(annotation: TiltAnnotation) -> etree._Element:
    el = _encode_record(annotation.payload, annotation.field.value)
    if annotation.origin is Origin.AUTO_FILLED:
        el.set(ORIGIN_ATTR, Origin.AUTO_FILLED.value)
    return el


def annotation_from_xml(el: etree._Element, element_id: str | None = None) -> TiltAnnotation:
    """Decode one ``tilt:*`` child of ``bpmn:extensionElements``."""
    tag = etree.QName(el).localname
    try:
        kind = TiltFieldKind(tag)
    except ValueError:
        raise UnknownTiltField(tag, element_id) from None
    where = f"{element_id or '?'}/tilt:{tag}"
    origin_raw = el.get(ORIGIN_ATTR, Origin.MANUAL.value)
    try:
        origin = Origin(origin_raw)
    except ValueError:
        raise SchemaViolation(f"{where}: unknown origin {origin_raw!r}") from None
    payload = _decode_record(PAYLOAD_TYPES[kind], el, where)
    return TiltAnnotation(kind, payload, origin)


# -- JSON -----------------------------------------------------------------------

def payload_to_json(record: Any) -> dict[str, Any]:
    """camelCase JSON object for a payload; unset optional fields are omitted."""
    out: dict[str, Any] = {}
    for f in dataclasses.fields(record):
        spec, value = f.metadata, getattr(record, f.name)
        if value is None:
            continue
        if spec["codec"] == "child":
            out[spec["name"]] = payload_to_json(value)
        elif spec["codec"] == "list":
            out[spec["name"]] = list(value)
        else:
            out[spec["name"]] = value
    return out


def payload_from_json(cls: type, data: Mapping[str, Any]) -> Any:
    kwargs: dict[str, Any] = {}
    for f in dataclasses.fields(cls):
        spec = f.metadata
        if spec["name"] not in data:
            continue
        value = data[spec["name"]]
        if spec["codec"] == "child":
            value = payload_from_json(_NESTED_TYPES[spec["name"]], value)
        elif spec["codec"] == "list":
            value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)


# -- model operations -----------------------------------------------------------

def attach(model: BpmnModel, element_id: str, annotation: TiltAnnotation) -> BpmnModel:
    """Append ``annotation`` to an element or message flow.

    Raises PlacementViolation when the mapping forbids the field there.
    """
    item = model.get(element_id)
    if not is_allowed(item, annotation.field, model.diagram_kind):
        what = placement_class(item)
        label = what.value if what else item.kind.value  # type: ignore[union-attr]
        raise PlacementViolation(
            f"{annotation.field.value} may not be attached to {label} {element_id!r} "
            f"in a {model.diagram_kind.value} diagram"
        )
    updated = dataclasses.replace(item, annotations=item.annotations + (annotation,))
    return model.replace_item(updated)


def extract(model: BpmnModel, kind: TiltFieldKind) -> list[tuple[str, TiltAnnotation]]:
    return [
        (item.id, ann)
        for item in model.iter_items()
        for ann in item.annotations
        if ann.field is kind
    ]


def iter_annotations(model: BpmnModel) -> Iterable[tuple[BpmnElement | Flow, TiltAnnotation]]:
    for item in model.iter_items():
        for ann in item.annotations:
            yield item, ann
