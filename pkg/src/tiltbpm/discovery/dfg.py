"""Directly-follows graphs and variant counts."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from ..eventlog import EventLog

Trace = tuple[str, ...]
LogLike = Union[EventLog, Iterable[Sequence[str]]]


def as_traces(log: LogLike) -> list[Trace]:
    if isinstance(log, EventLog):
        return log.activity_traces()
    return [tuple(t) for t in log]


@dataclass(frozen=True)
class Dfg:
    edge_counts: Mapping[tuple[str, str], int] = field(default_factory=dict)
    start_counts: Mapping[str, int] = field(default_factory=dict)
    end_counts: Mapping[str, int] = field(default_factory=dict)
    activity_counts: Mapping[str, int] = field(default_factory=dict)
    empty_traces: int = 0

    @property
    def activities(self) -> list[str]:
        return sorted(self.activity_counts)

    def successors(self, a: str) -> set[str]:
        return {y for (x, y) in self.edge_counts if x == a}

    def to_dot(self) -> str:
        lines = ["digraph dfg {", "  rankdir=LR;", '  "▶" [shape=circle];', '  "■" [shape=doublecircle];']
        for a in self.activities:
            lines.append(f'  "{_esc(a)}" [shape=box, label="{_esc(a)} ({self.activity_counts[a]})"];')
        for a, n in sorted(self.start_counts.items()):
            lines.append(f'  "▶" -> "{_esc(a)}" [label="{n}"];')
        for (a, b), n in sorted(self.edge_counts.items()):
            lines.append(f'  "{_esc(a)}" -> "{_esc(b)}" [label="{n}"];')
        for a, n in sorted(self.end_counts.items()):
            lines.append(f'  "{_esc(a)}" -> "■" [label="{n}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _esc(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def build_dfg(log: LogLike) -> Dfg:
    edges: Counter = Counter()
    starts: Counter = Counter()
    ends: Counter = Counter()
    acts: Counter = Counter()
    empty = 0
    for trace in as_traces(log):
        if not trace:
            empty += 1
            continue
        starts[trace[0]] += 1
        ends[trace[-1]] += 1
        acts.update(trace)
        edges.update(zip(trace, trace[1:]))
    return Dfg(dict(sorted(edges.items())), dict(sorted(starts.items())),
               dict(sorted(ends.items())), dict(sorted(acts.items())), empty)


def variants(log: LogLike) -> dict[Trace, int]:
    """Distinct activity sequences with counts, most frequent first."""
    counts = Counter(as_traces(log))
    return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
