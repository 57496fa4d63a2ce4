"""Convert a process tree into a single-process BPMN model."""

from __future__ import annotations

from ..bpmn import normalize
from ..layout import with_layout
from ..model import BpmnElement, BpmnModel, ElementClass, Flow, FlowKind, ProcessInfo
from .tree import Operator, ProcessTree

_GATEWAY_TAG = {
    Operator.XOR: "exclusiveGateway",
    Operator.LOOP: "exclusiveGateway",
    Operator.PARALLEL: "parallelGateway",
}


class _Builder:
    def __init__(self, process_id: str):
        self.pid = process_id
        self.elements: list[BpmnElement] = []
        self.flows: list[Flow] = []
        self.counts: dict[str, int] = {}

    def _next(self, prefix: str) -> str:
        self.counts[prefix] = self.counts.get(prefix, 0) + 1
        return f"{prefix}_{self.counts[prefix]}"

    def node(self, cls: ElementClass, prefix: str, name: str = "", tag: str = "") -> str:
        nid = self._next(prefix)
        self.elements.append(BpmnElement(nid, cls, name=name, tag=tag, process_id=self.pid))
        return nid

    def gateway(self, op: Operator) -> str:
        return self.node(ElementClass.GATEWAY, "Gateway", tag=_GATEWAY_TAG[op])

    def flow(self, src: str, tgt: str) -> None:
        self.flows.append(Flow(self._next("Flow"), FlowKind.SEQUENCE_FLOW, src, tgt,
                               process_id=self.pid))

    def build(self, tree: ProcessTree, src: str) -> str:
        """Attach ``tree`` after node ``src``; return the node the subtree exits from."""
        if tree.is_tau:
            return src
        if tree.is_leaf:
            act = self.node(ElementClass.ACTIVITY, "Activity", name=tree.label)
            self.flow(src, act)
            return act
        if tree.operator is Operator.SEQUENCE:
            for child in tree.children:
                src = self.build(child, src)
            return src
        if tree.operator is Operator.LOOP:
            join = self.gateway(Operator.LOOP)
            self.flow(src, join)
            body_end = self.build(tree.children[0], join)
            split = self.gateway(Operator.LOOP)
            self.flow(body_end, split)
            for redo in tree.children[1:]:
                self.flow(self.build(redo, split), join)
            return split
        split = self.gateway(tree.operator)
        self.flow(src, split)
        ends = [self.build(child, split) for child in tree.children]
        join = self.gateway(tree.operator)
        for end in ends:
            self.flow(end, join)
        return join


def tree_to_bpmn(tree: ProcessTree, process_id: str = "Process_1",
                 name: str = "Discovered process") -> BpmnModel:
    b = _Builder(process_id)
    start = b.node(ElementClass.START_EVENT, "StartEvent", name="start")
    last = b.build(tree, start)
    end = b.node(ElementClass.END_EVENT, "EndEvent", name="end")
    b.flow(last, end)
    model = BpmnModel(
        elements=tuple(b.elements),
        flows=tuple(b.flows),
        processes=(ProcessInfo(process_id, name=name, attributes={"isExecutable": "false"}),),
    )
    return normalize(with_layout(model))
