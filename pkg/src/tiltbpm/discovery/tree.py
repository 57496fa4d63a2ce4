"""Block-structured process trees."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator


class Operator(enum.Enum):
    SEQUENCE = "->"
    XOR = "X"
    PARALLEL = "+"
    LOOP = "*"


@dataclass(frozen=True)
class ProcessTree:
    """A leaf (``label`` set), a silent step (nothing set) or an operator node.

    For loops the first child is the body and the rest are redo alternatives.
    """

    operator: Operator | None = None
    children: tuple[ProcessTree, ...] = ()
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if self.operator is None:
            if self.children:
                raise ValueError("leaves have no children")
            if self.label is not None and not self.label:
                raise ValueError("leaf labels must be non-empty")
        else:
            if self.label is not None:
                raise ValueError("operator nodes carry no label")
            if len(self.children) < 2:
                raise ValueError(f"{self.operator.name} needs at least two children")

    @property
    def is_tau(self) -> bool:
        return self.operator is None and self.label is None

    @property
    def is_leaf(self) -> bool:
        return self.operator is None and self.label is not None

    def alphabet(self) -> frozenset[str]:
        if self.operator is None:
            return frozenset() if self.label is None else frozenset({self.label})
        return frozenset().union(*(c.alphabet() for c in self.children))

    def walk(self) -> Iterator[ProcessTree]:
        yield self
        for child in self.children:
            yield from child.walk()

    def __str__(self) -> str:
        if self.operator is None:
            return "tau" if self.label is None else self.label
        return f"{self.operator.value}({', '.join(str(c) for c in self.children)})"


def leaf(label: str) -> ProcessTree:
    return ProcessTree(label=label)


def tau() -> ProcessTree:
    return ProcessTree()


def sequence(*children: ProcessTree) -> ProcessTree:
    return ProcessTree(Operator.SEQUENCE, children)


def xor(*children: ProcessTree) -> ProcessTree:
    return ProcessTree(Operator.XOR, children)


def parallel(*children: ProcessTree) -> ProcessTree:
    return ProcessTree(Operator.PARALLEL, children)


def loop(body: ProcessTree, *redo: ProcessTree) -> ProcessTree:
    return ProcessTree(Operator.LOOP, (body, *redo))
