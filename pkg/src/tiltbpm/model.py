"""In-memory BPMN model: the recognized element subset plus opaque leftovers.

Model values are frozen; every editing helper returns a new model.  Opaque
XML (unrecognized elements, diagram interchange) is kept as canonical XML
strings so that equality of two models is plain dataclass equality.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Iterator, Mapping

from lxml import etree

from .errors import SchemaViolation

if TYPE_CHECKING:
    from .tilt import TiltAnnotation

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"
BPMNDI_NS = "http://www.omg.org/spec/BPMN/20100524/DI"
DC_NS = "http://www.omg.org/spec/DD/20100524/DC"
DI_NS = "http://www.omg.org/spec/DD/20100524/DI"
BIOC_NS = "http://bpmn.io/schema/bpmn/biocolor/1.0"
COLOR_NS = "http://www.omg.org/spec/BPMN/non-normative/color/1.0"
TILT_NS = "http://tilt-bpmn.org/schema/v1"

DEFAULT_NAMESPACES: Mapping[str, str] = {
    "bpmn": BPMN_NS,
    "bpmndi": BPMNDI_NS,
    "dc": DC_NS,
    "di": DI_NS,
    "tilt": TILT_NS,
}

_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")


class DiagramKind(enum.Enum):
    PROCESS = "Process"
    COLLABORATION = "Collaboration"


class ElementClass(enum.Enum):
    ACTIVITY = "Activity"
    START_EVENT = "StartEvent"
    END_EVENT = "EndEvent"
    GATEWAY = "Gateway"
    DATA_STORE_REFERENCE = "DataStoreReference"
    DATA_OBJECT_REFERENCE = "DataObjectReference"
    # Only used as a row of the placement matrix; message flows live in Flow.
    MESSAGE_FLOW = "MessageFlow"
    PARTICIPANT = "Participant"
    LANE = "Lane"


class FlowKind(enum.Enum):
    SEQUENCE_FLOW = "SequenceFlow"
    MESSAGE_FLOW = "MessageFlow"
    DATA_ASSOCIATION = "DataAssociation"


TAGS_BY_CLASS: Mapping[ElementClass, tuple[str, ...]] = {
    ElementClass.ACTIVITY: (
        "task", "userTask", "serviceTask", "sendTask", "receiveTask", "manualTask",
        "businessRuleTask", "scriptTask", "callActivity", "subProcess",
        "adHocSubProcess", "transaction",
    ),
    ElementClass.START_EVENT: ("startEvent",),
    ElementClass.END_EVENT: ("endEvent",),
    ElementClass.GATEWAY: (
        "exclusiveGateway", "parallelGateway", "inclusiveGateway",
        "eventBasedGateway", "complexGateway",
    ),
    ElementClass.DATA_STORE_REFERENCE: ("dataStoreReference",),
    ElementClass.DATA_OBJECT_REFERENCE: ("dataObjectReference",),
    ElementClass.PARTICIPANT: ("participant",),
    ElementClass.LANE: ("lane",),
}

CLASS_BY_TAG: Mapping[str, ElementClass] = {
    tag: cls for cls, tags in TAGS_BY_CLASS.items() for tag in tags
}

FLOW_TAGS: Mapping[FlowKind, tuple[str, ...]] = {
    FlowKind.SEQUENCE_FLOW: ("sequenceFlow",),
    FlowKind.MESSAGE_FLOW: ("messageFlow",),
    FlowKind.DATA_ASSOCIATION: ("dataInputAssociation", "dataOutputAssociation"),
}


@dataclass(frozen=True)
class BpmnElement:
    id: str
    element_class: ElementClass
    name: str = ""
    tag: str = ""
    attributes: Mapping[str, str] = field(default_factory=dict)
    annotations: tuple[TiltAnnotation, ...] = ()
    container: str | None = None
    country: str | None = None
    process_id: str | None = None
    extension_preserved: tuple[str, ...] = ()
    preserved: tuple[str, ...] = ()

    def __post_init__(self):
        if self.element_class is ElementClass.MESSAGE_FLOW:
            raise SchemaViolation(f"{self.id}: message flows are flows, not elements")
        if not self.tag:
            object.__setattr__(self, "tag", TAGS_BY_CLASS[self.element_class][0])
        elif CLASS_BY_TAG.get(self.tag) is not self.element_class:
            raise SchemaViolation(
                f"{self.id}: tag {self.tag!r} is not a {self.element_class.value}"
            )
        if self.country is not None:
            if self.element_class is not ElementClass.PARTICIPANT:
                raise SchemaViolation(f"{self.id}: only participants carry a country")
            if not _COUNTRY_RE.match(self.country):
                raise SchemaViolation(
                    f"{self.id}: country {self.country!r} is not an ISO 3166-1 alpha-2 code"
                )
        object.__setattr__(self, "annotations", tuple(self.annotations))


@dataclass(frozen=True)
class Flow:
    id: str
    kind: FlowKind
    source_id: str
    target_id: str
    name: str = ""
    tag: str = ""
    attributes: Mapping[str, str] = field(default_factory=dict)
    annotations: tuple[TiltAnnotation, ...] = ()
    process_id: str | None = None
    extension_preserved: tuple[str, ...] = ()
    preserved: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.tag:
            object.__setattr__(self, "tag", FLOW_TAGS[self.kind][0])
        elif self.tag not in FLOW_TAGS[self.kind]:
            raise SchemaViolation(f"{self.id}: tag {self.tag!r} is not a {self.kind.value}")
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if self.annotations and self.kind is not FlowKind.MESSAGE_FLOW:
            raise SchemaViolation(f"{self.id}: only message flows carry TILT annotations")

    @property
    def owner_id(self) -> str:
        """Element whose XML contains this data association."""
        if self.tag == "dataInputAssociation":
            return self.target_id
        return self.source_id


@dataclass(frozen=True)
class LaneSet:
    id: str
    lane_ids: tuple[str, ...] = ()
    name: str = ""
    parent_lane: str | None = None


@dataclass(frozen=True)
class ProcessInfo:
    id: str
    name: str = ""
    attributes: Mapping[str, str] = field(default_factory=dict)
    lane_sets: tuple[LaneSet, ...] = ()
    preserved: tuple[str, ...] = ()


@dataclass(frozen=True)
class CollaborationInfo:
    id: str
    name: str = ""
    attributes: Mapping[str, str] = field(default_factory=dict)
    preserved: tuple[str, ...] = ()


def _default_definitions() -> dict[str, str]:
    return {"id": "Definitions_1", "targetNamespace": "http://bpmn.io/schema/bpmn"}


@dataclass(frozen=True)
class BpmnModel:
    elements: tuple[BpmnElement, ...] = ()
    flows: tuple[Flow, ...] = ()
    processes: tuple[ProcessInfo, ...] = ()
    collaboration: CollaborationInfo | None = None
    definitions_attributes: Mapping[str, str] = field(default_factory=_default_definitions)
    namespaces: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_NAMESPACES))
    preserved: tuple[str, ...] = ()
    diagram_interchange: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(self, "processes", tuple(self.processes))
        self._validate()

    # -- derived views -----------------------------------------------------

    @property
    def diagram_kind(self) -> DiagramKind:
        if any(e.element_class is ElementClass.PARTICIPANT for e in self.elements):
            return DiagramKind.COLLABORATION
        return DiagramKind.PROCESS

    @cached_property
    def _index(self) -> dict[str, BpmnElement | Flow]:
        return {item.id: item for item in self.iter_items()}

    @cached_property
    def opaque_ids(self) -> frozenset[str]:
        """Ids declared inside preserved XML (e.g. intermediate events)."""
        ids: set[str] = set()
        chunks = [*self.preserved]
        for proc in self.processes:
            chunks.extend(proc.preserved)
        if self.collaboration is not None:
            chunks.extend(self.collaboration.preserved)
        for item in self.iter_items():
            chunks.extend(item.preserved)
        for chunk in chunks:
            for node in etree.fromstring(chunk).iter():
                if isinstance(node.tag, str) and node.get("id"):
                    ids.add(node.get("id"))
        return frozenset(ids)

    def iter_items(self) -> Iterator[BpmnElement | Flow]:
        """Elements then flows, the model's document order."""
        yield from self.elements
        yield from self.flows

    def document_order(self) -> dict[str, int]:
        return {item.id: i for i, item in enumerate(self.iter_items())}

    def get(self, item_id: str) -> BpmnElement | Flow:
        try:
            return self._index[item_id]
        except KeyError:
            raise KeyError(f"no element or flow with id {item_id!r}") from None

    def element(self, element_id: str) -> BpmnElement:
        item = self.get(element_id)
        if not isinstance(item, BpmnElement):
            raise KeyError(f"{element_id!r} is a flow, not an element")
        return item

    def has(self, item_id: str) -> bool:
        return item_id in self._index

    def elements_of(self, *classes: ElementClass) -> list[BpmnElement]:
        return [e for e in self.elements if e.element_class in classes]

    def flows_of(self, kind: FlowKind) -> list[Flow]:
        return [f for f in self.flows if f.kind is kind]

    def participant_of(self, item_id: str) -> BpmnElement | None:
        """Pool containing an element (the element itself for participants)."""
        if not self.has(item_id):
            return None
        element = self.get(item_id)
        if not isinstance(element, BpmnElement):
            return None
        seen = set()
        node: BpmnElement | None = element
        while node is not None and node.id not in seen:
            if node.element_class is ElementClass.PARTICIPANT:
                return node
            seen.add(node.id)
            parent = node.container
            node = self._index.get(parent) if parent else None  # type: ignore[assignment]
            if node is not None and not isinstance(node, BpmnElement):
                node = None
        if element.process_id is not None:
            for p in self.elements_of(ElementClass.PARTICIPANT):
                if p.attributes.get("processRef") == element.process_id:
                    return p
        return None

    # -- editing -------------------------------------------------------------

    def replace_item(self, item: BpmnElement | Flow) -> BpmnModel:
        """Return a copy with the element or flow of the same id swapped in."""
        if isinstance(item, BpmnElement):
            elements = tuple(item if e.id == item.id else e for e in self.elements)
            return dataclasses.replace(self, elements=elements)
        flows = tuple(item if f.id == item.id else f for f in self.flows)
        return dataclasses.replace(self, flows=flows)

    # -- invariants ------------------------------------------------------------

    def _validate(self) -> None:
        seen: set[str] = set()
        declared = [e.id for e in self.elements] + [f.id for f in self.flows]
        declared += [p.id for p in self.processes]
        declared += [ls.id for p in self.processes for ls in p.lane_sets]
        if self.collaboration is not None:
            declared.append(self.collaboration.id)
        for item_id in declared:
            if not item_id:
                raise SchemaViolation("empty id")
            if item_id in seen:
                raise SchemaViolation(f"duplicate id {item_id!r}")
            seen.add(item_id)

        process_ids = {p.id for p in self.processes}
        element_ids = {e.id for e in self.elements}
        for e in self.elements:
            if e.container is not None and e.container not in element_ids:
                raise SchemaViolation(f"{e.id}: unknown container {e.container!r}")
            if e.process_id is not None and e.process_id not in process_ids:
                raise SchemaViolation(f"{e.id}: unknown process {e.process_id!r}")

        known = element_ids | (self.opaque_ids if self._has_opaque() else frozenset())
        for f in self.flows:
            for end in (f.source_id, f.target_id):
                if end not in known:
                    raise SchemaViolation(f"{f.id}: dangling reference to {end!r}")
            if f.kind is FlowKind.MESSAGE_FLOW:
                src = self.participant_of(f.source_id)
                tgt = self.participant_of(f.target_id)
                if src is not None and tgt is not None and src.id == tgt.id:
                    raise SchemaViolation(
                        f"{f.id}: message flow must connect different participants"
                    )
            elif f.kind is FlowKind.DATA_ASSOCIATION and f.owner_id not in element_ids:
                raise SchemaViolation(f"{f.id}: data association owner must be an element")

    def _has_opaque(self) -> bool:
        if self.preserved:
            return True
        if any(p.preserved for p in self.processes):
            return True
        if self.collaboration is not None and self.collaboration.preserved:
            return True
        return any(item.preserved for item in self.iter_items())
