"""Best-effort diagram interchange layout.

Flow nodes are placed in columns by longest path from the start events
(back edges ignored) and stacked inside the band of their lane or pool.
"""

from __future__ import annotations

import dataclasses
from collections import defaultdict

from lxml import etree

from .bpmn import canonical
from .model import BPMNDI_NS, DC_NS, DI_NS, BpmnElement, BpmnModel, ElementClass, FlowKind

SIZES = {
    ElementClass.ACTIVITY: (100, 80),
    ElementClass.START_EVENT: (36, 36),
    ElementClass.END_EVENT: (36, 36),
    ElementClass.GATEWAY: (50, 50),
    ElementClass.DATA_STORE_REFERENCE: (50, 50),
    ElementClass.DATA_OBJECT_REFERENCE: (36, 50),
}
DATA_CLASSES = {ElementClass.DATA_STORE_REFERENCE, ElementClass.DATA_OBJECT_REFERENCE}
COL_W, ROW_H = 150, 110
ORIGIN_X, ORIGIN_Y = 160, 80
POOL_HEADER, LANE_HEADER, BLACK_BOX_H = 30, 30, 100

Box = tuple[int, int, int, int]


def _layers(model: BpmnModel) -> dict[str, int]:
    nodes = [e.id for e in model.elements if e.element_class in SIZES
             and e.element_class not in DATA_CLASSES]
    node_set = set(nodes)
    succ: dict[str, list[str]] = defaultdict(list)
    has_in = set()
    for f in model.flows_of(FlowKind.SEQUENCE_FLOW):
        if f.source_id in node_set and f.target_id in node_set:
            succ[f.source_id].append(f.target_id)
            has_in.add(f.target_id)

    # drop back edges found by DFS from the entry nodes, in document order
    back: set[tuple[str, str]] = set()
    state: dict[str, int] = {}
    roots = [n for n in nodes if n not in has_in] + nodes
    for root in roots:
        if root in state:
            continue
        stack = [(root, iter(succ[root]))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
            elif state.get(nxt) == 1:
                back.add((node, nxt))
            elif nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(succ[nxt])))

    layer = {n: 0 for n in nodes}
    indeg = {n: 0 for n in nodes}
    for a in nodes:
        for b in succ[a]:
            if (a, b) not in back:
                indeg[b] += 1
    ready = [n for n in nodes if indeg[n] == 0]
    while ready:
        a = ready.pop(0)
        for b in succ[a]:
            if (a, b) in back:
                continue
            layer[b] = max(layer[b], layer[a] + 1)
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
    return layer


def _leaf_lanes(model: BpmnModel, process_id: str | None) -> list[str]:
    proc = next((p for p in model.processes if p.id == process_id), None)
    if proc is None:
        return []
    children: dict[str | None, list[str]] = defaultdict(list)
    for ls in proc.lane_sets:
        children[ls.parent_lane].extend(ls.lane_ids)
    out: list[str] = []

    def visit(lane: str):
        if children.get(lane):
            for c in children[lane]:
                visit(c)
        else:
            out.append(lane)

    for lane in children.get(None, []):
        visit(lane)
    return out


def layout(model: BpmnModel) -> str:
    """Return a canonical ``bpmndi:BPMNDiagram`` for ``model``."""
    layers = _layers(model)
    elements = {e.id: e for e in model.elements}
    participants = model.elements_of(ElementClass.PARTICIPANT)
    lanes_of: dict[str, list[str]] = {}
    for p in participants:
        lanes = _leaf_lanes(model, p.attributes.get("processRef"))
        lanes_of[p.id] = lanes
        if p.attributes.get("processRef"):
            lanes_of[p.attributes["processRef"]] = lanes or [p.id]
    band_of: dict[str, str] = {}
    for e in model.elements:
        if e.element_class in SIZES:
            band = e.container or e.process_id or "_"
            # nodes held directly by a pool with lanes go to its last lane
            band_of[e.id] = lanes_of[band][-1] if lanes_of.get(band) else band

    # data references sit in the column of the first activity they touch
    for f in model.flows_of(FlowKind.DATA_ASSOCIATION):
        for data, other in ((f.source_id, f.target_id), (f.target_id, f.source_id)):
            if data in elements and elements[data].element_class in DATA_CLASSES:
                if data not in layers and other in layers:
                    layers[data] = layers[other]
    for e in model.elements:
        if e.element_class in DATA_CLASSES:
            layers.setdefault(e.id, 0)

    # rows within each band
    rows: dict[str, int] = {}
    band_rows: dict[str, int] = defaultdict(int)
    used: dict[tuple[str, int], int] = defaultdict(int)
    data_row_needed: set[str] = set()
    for e in model.elements:
        if e.element_class not in SIZES or e.element_class in DATA_CLASSES:
            continue
        key = (band_of[e.id], layers[e.id])
        rows[e.id] = used[key]
        used[key] += 1
        band_rows[band_of[e.id]] = max(band_rows[band_of[e.id]], used[key])
    for e in model.elements:
        if e.element_class in DATA_CLASSES:
            data_row_needed.add(band_of[e.id])

    def band_height(band: str) -> int:
        n = max(band_rows.get(band, 0), 1) + (1 if band in data_row_needed else 0)
        return n * ROW_H

    width = (max(layers.values(), default=0) + 1) * COL_W + 2 * POOL_HEADER + 60
    boxes: dict[str, Box] = {}
    band_y: dict[str, int] = {}
    y = ORIGIN_Y
    if participants:
        for p in participants:
            lanes = lanes_of[p.id]
            top = y
            if lanes:
                for lane in lanes:
                    band_y[lane] = y
                    y += band_height(lane)
            elif p.attributes.get("processRef") or band_rows.get(p.id):
                band_y[p.id] = y
                y += band_height(p.id)
            else:
                y += BLACK_BOX_H
            boxes[p.id] = (ORIGIN_X, top, width, y - top)
            # parent lanes span their leaves
            proc = next((pr for pr in model.processes if pr.id == p.attributes.get("processRef")), None)
            if proc is not None:
                spans = _lane_spans(proc, lanes, band_y, band_height)
                for lane_id, (ly, lh, depth) in spans.items():
                    lx = ORIGIN_X + POOL_HEADER + depth * LANE_HEADER
                    boxes[lane_id] = (lx, ly, width - (lx - ORIGIN_X), lh)
            y += 40
    others = sorted({b for b in band_of.values() if b not in band_y})
    for band in others:
        band_y[band] = y
        y += band_height(band)

    content_x = ORIGIN_X + POOL_HEADER + LANE_HEADER + 20 if participants else ORIGIN_X
    for e in model.elements:
        if e.element_class not in SIZES:
            continue
        w, h = SIZES[e.element_class]
        band = band_of[e.id]
        row = band_rows.get(band, 1) if e.element_class in DATA_CLASSES else rows[e.id]
        x = content_x + layers[e.id] * COL_W + (COL_W - w) // 2
        by = band_y[band] + row * ROW_H + (ROW_H - h) // 2
        boxes[e.id] = (x, by, w, h)
    return _render(model, boxes)


def _lane_spans(proc, leaves, band_y, band_height) -> dict[str, tuple[int, int, int]]:
    parent_of = {lane: ls.parent_lane for ls in proc.lane_sets for lane in ls.lane_ids}
    spans: dict[str, tuple[int, int, int]] = {}

    def depth(lane):
        d, p = 0, parent_of.get(lane)
        while p is not None:
            d, p = d + 1, parent_of.get(p)
        return d

    for leaf in leaves:
        top, bottom = band_y[leaf], band_y[leaf] + band_height(leaf)
        lane = leaf
        while lane is not None:
            if lane in spans:
                y0, h, d = spans[lane]
                top_, bottom_ = min(y0, top), max(y0 + h, bottom)
            else:
                top_, bottom_ = top, bottom
            spans[lane] = (top_, bottom_ - top_, depth(lane))
            lane = parent_of.get(lane)
    return spans


def _di(tag: str, ns: str = BPMNDI_NS, **attrs) -> etree._Element:
    el = etree.Element(f"{{{ns}}}{tag}", nsmap={"bpmndi": BPMNDI_NS, "dc": DC_NS, "di": DI_NS})
    for k, v in attrs.items():
        el.set(k, v)
    return el


def _waypoints(src: Box, tgt: Box, kind: FlowKind) -> list[tuple[int, int]]:
    sx, sy, sw, sh = src
    tx, ty, tw, th = tgt
    if kind is FlowKind.MESSAGE_FLOW:
        x = (max(sx, tx) + min(sx + sw, tx + tw)) // 2 if sx < tx + tw and tx < sx + sw else sx + sw // 2
        if ty >= sy + sh:
            return [(x, sy + sh), (x, ty)]
        return [(x, sy), (x, ty + th)]
    if tx >= sx + sw:
        a, b = (sx + sw, sy + sh // 2), (tx, ty + th // 2)
        if a[1] == b[1]:
            return [a, b]
        return [a, (a[0] + (b[0] - a[0]) // 2, a[1]), (a[0] + (b[0] - a[0]) // 2, b[1]), b]
    low = max(sy + sh, ty + th) + 20
    return [(sx + sw // 2, sy + sh), (sx + sw // 2, low), (tx + tw // 2, low), (tx + tw // 2, ty + th)]


def _render(model: BpmnModel, boxes: dict[str, Box]) -> str:
    plane_ref = model.collaboration.id if model.collaboration is not None else (
        model.processes[0].id if model.processes else "Process_1")
    diagram = _di("BPMNDiagram", id="BPMNDiagram_1")
    plane = _di("BPMNPlane", id="BPMNPlane_1", bpmnElement=plane_ref)
    diagram.append(plane)
    for e in model.elements:
        if e.id not in boxes:
            continue
        attrs = {"id": f"{e.id}_di", "bpmnElement": e.id}
        if e.element_class in (ElementClass.PARTICIPANT, ElementClass.LANE):
            attrs["isHorizontal"] = "true"
        shape = _di("BPMNShape", **attrs)
        x, y, w, h = boxes[e.id]
        shape.append(_di("Bounds", DC_NS, x=str(x), y=str(y), width=str(w), height=str(h)))
        plane.append(shape)
    for f in model.flows:
        if f.source_id not in boxes or f.target_id not in boxes:
            continue
        edge = _di("BPMNEdge", id=f"{f.id}_di", bpmnElement=f.id)
        for x, y in _waypoints(boxes[f.source_id], boxes[f.target_id], f.kind):
            edge.append(_di("waypoint", DI_NS, x=str(x), y=str(y)))
        plane.append(edge)
    return canonical(diagram)


def with_layout(model: BpmnModel) -> BpmnModel:
    return dataclasses.replace(model, diagram_interchange=(layout(model),))
