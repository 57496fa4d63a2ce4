"""BPMN 2.0 XML parsing and serialization with TILT extension support.

Recognized constructs are decoded into :mod:`tiltbpm.model` values; anything
else is kept as canonical XML and re-emitted untouched.  Whitespace-only text
is not significant: the output is always pretty-printed.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable

from lxml import etree

from .errors import MalformedXml, SchemaViolation
from .model import (
    BPMN_NS,
    BPMNDI_NS,
    CLASS_BY_TAG,
    DEFAULT_NAMESPACES,
    TILT_NS,
    BpmnElement,
    BpmnModel,
    CollaborationInfo,
    ElementClass,
    Flow,
    FlowKind,
    LaneSet,
    ProcessInfo,
)
from .tilt import annotation_from_xml, annotation_to_xml

_COUNTRY_ATTR = f"{{{TILT_NS}}}country"


def _parser() -> etree.XMLParser:
    return etree.XMLParser(remove_blank_text=True, resolve_entities=False, no_network=True)


def _b(local: str) -> str:
    return f"{{{BPMN_NS}}}{local}"


def _local(el: etree._Element) -> str:
    return etree.QName(el).localname


def _is_bpmn(el: etree._Element, *names: str) -> bool:
    if not isinstance(el.tag, str):
        return False
    q = etree.QName(el)
    return q.namespace == BPMN_NS and (not names or q.localname in names)


def canonical(el: etree._Element) -> str:
    """Stable textual form of an opaque subtree."""
    if not isinstance(el.tag, str):
        raise TypeError("only elements can be canonicalized")
    return etree.tostring(el, method="c14n", exclusive=True, with_comments=True).decode()


def _attrs(el: etree._Element, skip: Iterable[str] = ("id", "name")) -> dict[str, str]:
    skip = set(skip)
    return {k: v for k, v in el.attrib.items() if k not in skip}


# -- parsing -----------------------------------------------------------------------

class _ParseState:
    def __init__(self):
        self.elements: list[dict] = []
        self.flows: list[dict] = []
        self.lane_depth: dict[str, int] = {}
        self.lane_refs: list[tuple[str, str, int]] = []  # (lane id, ref, depth)


def parse_bpmn(xml_text: str | bytes) -> BpmnModel:
    """Parse BPMN 2.0 XML into a :class:`BpmnModel`."""
    data = xml_text.encode("utf-8") if isinstance(xml_text, str) else xml_text
    try:
        root = etree.fromstring(data, _parser())
    except etree.XMLSyntaxError as exc:
        raise MalformedXml(str(exc)) from None
    if not _is_bpmn(root, "definitions"):
        raise SchemaViolation(f"root element must be bpmn:definitions, got {root.tag!r}")

    seen: set[str] = set()
    for node in root.iter():
        # TILT payload ids (dataDisclosed) are local to their record
        if isinstance(node.tag, str) and node.get("id") is not None \
                and etree.QName(node).namespace != TILT_NS:
            node_id = node.get("id")
            if node_id in seen:
                raise SchemaViolation(f"duplicate id {node_id!r}")
            seen.add(node_id)

    state = _ParseState()
    processes: list[ProcessInfo] = []
    collaboration: CollaborationInfo | None = None
    preserved: list[str] = []
    diagrams: list[str] = []

    for child in root:
        if not isinstance(child.tag, str):
            continue
        if _is_bpmn(child, "collaboration") and collaboration is None:
            collaboration = _parse_collaboration(child, state)
        elif _is_bpmn(child, "process"):
            processes.append(_parse_process(child, state))
        elif etree.QName(child).namespace == BPMNDI_NS and _local(child) == "BPMNDiagram":
            diagrams.append(canonical(child))
        else:
            preserved.append(canonical(child))

    _resolve_containers(state, processes)
    namespaces = {p: u for p, u in root.nsmap.items() if p and u not in (BPMN_NS, TILT_NS)}
    namespaces.update({"bpmn": BPMN_NS, "tilt": TILT_NS})

    try:
        return BpmnModel(
            elements=tuple(BpmnElement(**e) for e in state.elements),
            flows=tuple(Flow(**f) for f in state.flows),
            processes=tuple(processes),
            collaboration=collaboration,
            definitions_attributes=dict(root.attrib),
            namespaces=dict(sorted(namespaces.items())),
            preserved=tuple(preserved),
            diagram_interchange=tuple(diagrams),
        )
    except TypeError as exc:  # pragma: no cover - defensive
        raise SchemaViolation(str(exc)) from None


def _split_children(el: etree._Element, owner_id: str) -> tuple[list, list[str], list[str], list]:
    """Separate TILT annotations, foreign extensions, data associations, and the rest."""
    annotations, ext_preserved, preserved, assocs = [], [], [], []
    for child in el:
        if not isinstance(child.tag, str):
            continue  # comments and PIs directly under recognized elements are dropped
        elif _is_bpmn(child, "extensionElements"):
            for ext in child:
                if isinstance(ext.tag, str) and etree.QName(ext).namespace == TILT_NS:
                    annotations.append(annotation_from_xml(ext, owner_id))
                else:
                    ext_preserved.append(canonical(ext))
        elif _is_bpmn(child, "dataInputAssociation", "dataOutputAssociation"):
            assocs.append(child)
        elif _is_bpmn(child, "incoming", "outgoing"):
            continue  # regenerated from sequence flows
        else:
            preserved.append(canonical(child))
    return annotations, ext_preserved, preserved, assocs


def _parse_collaboration(el: etree._Element, state: _ParseState) -> CollaborationInfo:
    preserved = []
    for child in el:
        if not isinstance(child.tag, str):
            continue
        if _is_bpmn(child, "participant"):
            pid = child.get("id")
            anns, ext, rest, _ = _split_children(child, pid)
            country = child.get(_COUNTRY_ATTR)
            state.elements.append(dict(
                id=pid, element_class=ElementClass.PARTICIPANT, name=child.get("name", ""),
                tag="participant", attributes=_attrs(child, ("id", "name", _COUNTRY_ATTR)),
                annotations=tuple(anns), country=country,
                extension_preserved=tuple(ext), preserved=tuple(rest),
            ))
        elif _is_bpmn(child, "messageFlow"):
            fid = child.get("id")
            anns, ext, rest, _ = _split_children(child, fid)
            state.flows.append(dict(
                id=fid, kind=FlowKind.MESSAGE_FLOW, source_id=_required(child, "sourceRef"),
                target_id=_required(child, "targetRef"), name=child.get("name", ""),
                tag="messageFlow", attributes=_attrs(child, ("id", "name", "sourceRef", "targetRef")),
                annotations=tuple(anns), extension_preserved=tuple(ext), preserved=tuple(rest),
            ))
        else:
            preserved.append(canonical(child))
    return CollaborationInfo(
        id=el.get("id", ""), name=el.get("name", ""), attributes=_attrs(el),
        preserved=tuple(preserved),
    )


def _required(el: etree._Element, attr: str) -> str:
    value = el.get(attr)
    if not value:
        raise SchemaViolation(f"{el.get('id')}: missing {attr}")
    return value


def _parse_process(el: etree._Element, state: _ParseState) -> ProcessInfo:
    pid = el.get("id", "")
    preserved, lane_sets = [], []
    for child in el:
        if not isinstance(child.tag, str):
            continue
        local = _local(child)
        if _is_bpmn(child, "laneSet"):
            lane_sets.extend(_parse_lane_set(child, pid, None, 0, state))
        elif _is_bpmn(child) and local in CLASS_BY_TAG and local not in ("participant", "lane"):
            _parse_node(child, pid, state)
        elif _is_bpmn(child, "sequenceFlow"):
            fid = child.get("id")
            anns, ext, rest, _ = _split_children(child, fid)
            if anns:
                raise SchemaViolation(f"{fid}: only message flows carry TILT annotations")
            state.flows.append(dict(
                id=fid, kind=FlowKind.SEQUENCE_FLOW, source_id=_required(child, "sourceRef"),
                target_id=_required(child, "targetRef"), name=child.get("name", ""),
                tag="sequenceFlow", attributes=_attrs(child, ("id", "name", "sourceRef", "targetRef")),
                process_id=pid, extension_preserved=tuple(ext), preserved=tuple(rest),
            ))
        else:
            preserved.append(canonical(child))
    return ProcessInfo(
        id=pid, name=el.get("name", ""), attributes=_attrs(el),
        lane_sets=tuple(lane_sets), preserved=tuple(preserved),
    )


def _parse_node(el: etree._Element, pid: str, state: _ParseState) -> None:
    nid = el.get("id")
    if not nid:
        raise SchemaViolation(f"<{_local(el)}> without id")
    anns, ext, rest, assocs = _split_children(el, nid)
    state.elements.append(dict(
        id=nid, element_class=CLASS_BY_TAG[_local(el)], name=el.get("name", ""),
        tag=_local(el), attributes=_attrs(el), annotations=tuple(anns),
        process_id=pid, extension_preserved=tuple(ext), preserved=tuple(rest),
    ))
    for n, assoc in enumerate(assocs, 1):
        tag = _local(assoc)
        fid = assoc.get("id") or f"{nid}_{tag}_{n}"
        refs = {"sourceRef": [], "targetRef": []}
        kept, ext_kept = [], []
        for part in assoc:
            if _is_bpmn(part, "sourceRef", "targetRef"):
                refs[_local(part)].append((part.text or "").strip())
                if tag == "dataInputAssociation" and _local(part) == "targetRef":
                    kept.append(canonical(part))
                elif tag == "dataOutputAssociation" and _local(part) == "sourceRef":
                    kept.append(canonical(part))
            elif _is_bpmn(part, "extensionElements"):
                ext_kept.extend(canonical(x) for x in part if isinstance(x.tag, str))
            elif isinstance(part.tag, str):
                kept.append(canonical(part))
        if tag == "dataInputAssociation":
            if not refs["sourceRef"]:
                raise SchemaViolation(f"{fid}: data input association without sourceRef")
            source, target = refs["sourceRef"][0], nid
        else:
            if not refs["targetRef"]:
                raise SchemaViolation(f"{fid}: data output association without targetRef")
            source, target = nid, refs["targetRef"][0]
        state.flows.append(dict(
            id=fid, kind=FlowKind.DATA_ASSOCIATION, source_id=source, target_id=target,
            tag=tag, attributes=_attrs(assoc), process_id=pid,
            extension_preserved=tuple(ext_kept), preserved=tuple(kept),
        ))


def _parse_lane_set(el, pid, parent_lane, depth, state) -> list[LaneSet]:
    lane_ids: list[str] = []
    nested: list[LaneSet] = []
    for lane in el:
        if not _is_bpmn(lane, "lane"):
            continue  # laneSet has no other meaningful children
        lid = lane.get("id")
        lane_ids.append(lid)
        state.lane_depth[lid] = depth
        anns, ext, rest = [], [], []
        for child in lane:
            if _is_bpmn(child, "flowNodeRef"):
                state.lane_refs.append((lid, (child.text or "").strip(), depth))
            elif _is_bpmn(child, "childLaneSet"):
                nested.extend(_parse_lane_set(child, pid, lid, depth + 1, state))
            elif _is_bpmn(child, "extensionElements"):
                for ext_el in child:
                    if not isinstance(ext_el.tag, str):
                        continue
                    if etree.QName(ext_el).namespace == TILT_NS:
                        anns.append(annotation_from_xml(ext_el, lid))
                    else:
                        ext.append(canonical(ext_el))
            elif isinstance(child.tag, str):
                rest.append(canonical(child))
        state.elements.append(dict(
            id=lid, element_class=ElementClass.LANE, name=lane.get("name", ""), tag="lane",
            attributes=_attrs(lane), annotations=tuple(anns), container=parent_lane,
            process_id=pid, extension_preserved=tuple(ext), preserved=tuple(rest),
        ))
    fallback = f"{parent_lane}_childLaneSet" if parent_lane else f"{pid}_laneSet"
    own = LaneSet(id=el.get("id") or fallback,
                  lane_ids=tuple(lane_ids), name=el.get("name", ""), parent_lane=parent_lane)
    return [own, *nested]


def _resolve_containers(state: _ParseState, processes: list[ProcessInfo]) -> None:
    by_id = {e["id"]: e for e in state.elements}
    pool_of_process = {
        e["attributes"].get("processRef"): e["id"]
        for e in state.elements
        if e["element_class"] is ElementClass.PARTICIPANT and e["attributes"].get("processRef")
    }
    best_depth: dict[str, int] = {}
    for lane_id, ref, depth in state.lane_refs:
        target = by_id.get(ref)
        if target is None or target["element_class"] in (ElementClass.LANE, ElementClass.PARTICIPANT):
            lane = by_id[lane_id]
            node = etree.Element(_b("flowNodeRef"))
            node.text = ref
            lane["preserved"] = lane["preserved"] + (canonical(node),)
            continue
        if depth >= best_depth.get(ref, -1):
            best_depth[ref] = depth
            target["container"] = lane_id
    for e in state.elements:
        if e["element_class"] is ElementClass.PARTICIPANT or e.get("container"):
            continue
        pool = pool_of_process.get(e.get("process_id"))
        if pool is not None:
            e["container"] = pool


# -- serialization ------------------------------------------------------------------

_NODE_RANK = {
    "documentation": 0, "extensionElements": 1, "auditing": 2, "monitoring": 3,
    "categoryValueRef": 4, "incoming": 5, "outgoing": 6, "ioSpecification": 7,
    "property": 8, "dataInput": 9, "dataOutput": 9, "dataInputAssociation": 10,
    "dataOutputAssociation": 11, "inputSet": 12, "outputSet": 12,
    "eventDefinitionRef": 14, "resourceRole": 15, "performer": 15,
    "humanPerformer": 15, "potentialOwner": 15,
    "standardLoopCharacteristics": 16, "multiInstanceLoopCharacteristics": 16,
}
_ASSOC_RANK = {"documentation": 0, "extensionElements": 1, "sourceRef": 2, "targetRef": 3,
               "transformation": 4, "assignment": 5}
_LANE_RANK = {"documentation": 0, "extensionElements": 1, "partitionElement": 2,
              "flowNodeRef": 3, "childLaneSet": 4}
_PROCESS_RANK = {"documentation": 0, "extensionElements": 1, "auditing": 2, "monitoring": 3,
                 "property": 4, "laneSet": 5}
_COLLAB_RANK = {"documentation": 0, "extensionElements": 1, "participant": 2, "messageFlow": 3}
_ROOT_RANK = {"import": 0, "extension": 1, "collaboration": 2, "process": 3, "BPMNDiagram": 5,
              "relationship": 6}


def _rank(table: dict[str, int], default: int):
    def key(el: etree._Element) -> int:
        if not isinstance(el.tag, str):
            return default
        local = _local(el)
        if local.endswith("EventDefinition") and table is _NODE_RANK:
            return 13
        return table.get(local, default)
    return key


def _append_sorted(parent: etree._Element, children: list, key) -> None:
    for child in sorted(children, key=key):
        parent.append(child)


def _frag(text: str) -> etree._Element:
    return etree.fromstring(text.encode("utf-8"), _parser())


def _set_attrs(el: etree._Element, item_id: str | None, name: str, attrs) -> None:
    if item_id:
        el.set("id", item_id)
    if name:
        el.set("name", name)
    for key in sorted(attrs):
        el.set(key, attrs[key])


def _extension_block(annotations, ext_preserved) -> etree._Element | None:
    if not annotations and not ext_preserved:
        return None
    block = etree.Element(_b("extensionElements"))
    for ann in annotations:
        block.append(annotation_to_xml(ann))
    for text in ext_preserved:
        block.append(_frag(text))
    return block


def _common_children(item) -> list[etree._Element]:
    children = [_frag(t) for t in item.preserved]
    block = _extension_block(item.annotations, item.extension_preserved)
    if block is not None:
        children.append(block)
    return children


def serialize_bpmn(model: BpmnModel) -> str:
    """Emit deterministic BPMN 2.0 XML for ``model``."""
    nsmap = {p: u for p, u in sorted(model.namespaces.items()) if p}
    nsmap.setdefault("bpmn", BPMN_NS)
    nsmap.setdefault("tilt", TILT_NS)
    root = etree.Element(_b("definitions"), nsmap=nsmap)
    for key in sorted(model.definitions_attributes):
        root.set(key, model.definitions_attributes[key])

    seq_in: dict[str, list[str]] = defaultdict(list)
    seq_out: dict[str, list[str]] = defaultdict(list)
    for f in model.flows_of(FlowKind.SEQUENCE_FLOW):
        seq_out[f.source_id].append(f.id)
        seq_in[f.target_id].append(f.id)
    assoc_by_owner: dict[str, list[Flow]] = defaultdict(list)
    for f in model.flows_of(FlowKind.DATA_ASSOCIATION):
        assoc_by_owner[f.owner_id].append(f)

    top: list[etree._Element] = []
    if model.collaboration is not None or model.elements_of(ElementClass.PARTICIPANT):
        top.append(_serialize_collaboration(model))
    for proc in model.processes:
        top.append(_serialize_process(model, proc, seq_in, seq_out, assoc_by_owner))
    top.extend(_frag(t) for t in model.preserved)
    top.extend(_frag(t) for t in model.diagram_interchange)
    _append_sorted(root, top, _rank(_ROOT_RANK, 4))

    etree.cleanup_namespaces(root, keep_ns_prefixes=list(nsmap))
    return etree.tostring(
        root, xml_declaration=True, encoding="UTF-8", pretty_print=True
    ).decode("utf-8")


def _serialize_collaboration(model: BpmnModel) -> etree._Element:
    info = model.collaboration or CollaborationInfo(id="Collaboration_1")
    el = etree.Element(_b("collaboration"))
    _set_attrs(el, info.id, info.name, info.attributes)
    children = [_frag(t) for t in info.preserved]
    for p in model.elements_of(ElementClass.PARTICIPANT):
        node = etree.Element(_b("participant"))
        attrs = dict(p.attributes)
        if p.country:
            attrs[_COUNTRY_ATTR] = p.country
        _set_attrs(node, p.id, p.name, attrs)
        _append_sorted(node, _common_children(p), _rank(_NODE_RANK, 17))
        children.append(node)
    for f in model.flows_of(FlowKind.MESSAGE_FLOW):
        node = etree.Element(_b("messageFlow"))
        _set_attrs(node, f.id, f.name,
                   {**f.attributes, "sourceRef": f.source_id, "targetRef": f.target_id})
        _append_sorted(node, _common_children(f), _rank(_NODE_RANK, 17))
        children.append(node)
    _append_sorted(el, children, _rank(_COLLAB_RANK, 4))
    return el


def _serialize_process(model, proc, seq_in, seq_out, assoc_by_owner) -> etree._Element:
    el = etree.Element(_b("process"))
    _set_attrs(el, proc.id, proc.name, proc.attributes)
    children: list[etree._Element] = []
    members = [e for e in model.elements if e.process_id == proc.id]
    lanes = {e.id: e for e in members if e.element_class is ElementClass.LANE}

    lane_members: dict[str, list[str]] = defaultdict(list)
    for e in members:
        if e.element_class is ElementClass.LANE:
            continue
        lane_id = e.container if e.container in lanes else None
        guard = set()
        while lane_id is not None and lane_id not in guard:
            guard.add(lane_id)
            lane_members[lane_id].append(e.id)
            parent = lanes[lane_id].container
            lane_id = parent if parent in lanes else None

    sets_by_parent: dict[str | None, list[LaneSet]] = defaultdict(list)
    for ls in proc.lane_sets:
        sets_by_parent[ls.parent_lane].append(ls)

    def build_lane_set(ls: LaneSet, tag: str) -> etree._Element:
        node = etree.Element(_b(tag))
        _set_attrs(node, ls.id, ls.name, {})
        for lid in ls.lane_ids:
            lane = lanes[lid]
            lane_el = etree.Element(_b("lane"))
            _set_attrs(lane_el, lane.id, lane.name, lane.attributes)
            parts = _common_children(lane)
            for ref in lane_members.get(lid, []):
                ref_el = etree.Element(_b("flowNodeRef"))
                ref_el.text = ref
                parts.append(ref_el)
            for child_set in sets_by_parent.get(lid, []):
                parts.append(build_lane_set(child_set, "childLaneSet"))
            _append_sorted(lane_el, parts, _rank(_LANE_RANK, 5))
            node.append(lane_el)
        return node

    for ls in sets_by_parent.get(None, []):
        children.append(build_lane_set(ls, "laneSet"))

    for e in members:
        if e.element_class is ElementClass.LANE:
            continue
        node = etree.Element(_b(e.tag))
        _set_attrs(node, e.id, e.name, e.attributes)
        parts = _common_children(e)
        for tag, refs in (("incoming", seq_in), ("outgoing", seq_out)):
            for fid in refs.get(e.id, []):
                ref_el = etree.Element(_b(tag))
                ref_el.text = fid
                parts.append(ref_el)
        for assoc in assoc_by_owner.get(e.id, []):
            parts.append(_serialize_association(assoc))
        _append_sorted(node, parts, _rank(_NODE_RANK, 17))
        children.append(node)

    for f in model.flows_of(FlowKind.SEQUENCE_FLOW):
        if f.process_id != proc.id:
            continue
        node = etree.Element(_b("sequenceFlow"))
        _set_attrs(node, f.id, f.name,
                   {**f.attributes, "sourceRef": f.source_id, "targetRef": f.target_id})
        _append_sorted(node, _common_children(f), _rank({"documentation": 0,
                                                         "extensionElements": 1}, 2))
        children.append(node)

    children.extend(_frag(t) for t in proc.preserved)
    _append_sorted(el, children, _rank(_PROCESS_RANK, 6))
    return el


def _serialize_association(f: Flow) -> etree._Element:
    node = etree.Element(_b(f.tag))
    _set_attrs(node, f.id, "", f.attributes)
    parts = _common_children(f)
    ref = etree.Element(_b("sourceRef" if f.tag == "dataInputAssociation" else "targetRef"))
    ref.text = f.source_id if f.tag == "dataInputAssociation" else f.target_id
    parts.append(ref)
    _append_sorted(node, parts, _rank(_ASSOC_RANK, 6))
    return node


def normalize(model: BpmnModel) -> BpmnModel:
    """Reorder a hand-built model into the order the parser produces."""
    return parse_bpmn(serialize_bpmn(model))


def read_bpmn(path) -> BpmnModel:
    with open(path, "rb") as fh:
        return parse_bpmn(fh.read())


def write_bpmn(model: BpmnModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_bpmn(model))


__all__ = ["parse_bpmn", "serialize_bpmn", "read_bpmn", "write_bpmn", "canonical",
           "DEFAULT_NAMESPACES"]
