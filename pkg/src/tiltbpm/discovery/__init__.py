from .dfg import Dfg, as_traces, build_dfg, variants
from .inductive import inductive_mine
from .to_bpmn import tree_to_bpmn
from .tree import Operator, ProcessTree, leaf, loop, parallel, sequence, tau, xor

__all__ = [
    "Dfg", "Operator", "ProcessTree", "as_traces", "build_dfg", "inductive_mine",
    "leaf", "loop", "parallel", "sequence", "tau", "tree_to_bpmn", "variants", "xor",
]
