"""Basic inductive miner (no noise filtering).

Cuts are tried in the order exclusive choice, sequence, parallel, loop.  If
none applies the flower model over the remaining activities is returned,
which keeps perfect replay fitness.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional

from ..errors import EmptyLog
from .dfg import LogLike, Trace, as_traces
from .tree import Operator, ProcessTree, leaf, loop, tau, xor

Groups = list[frozenset[str]]
SubLog = Counter  # Counter[Trace]


@dataclass(frozen=True)
class _Graph:
    alphabet: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    starts: frozenset[str]
    ends: frozenset[str]

    @classmethod
    def of(cls, log: SubLog) -> _Graph:
        edges, starts, ends, acts = set(), set(), set(), set()
        for t in log:
            starts.add(t[0])
            ends.add(t[-1])
            acts.update(t)
            edges.update(zip(t, t[1:]))
        return cls(tuple(sorted(acts)), frozenset(edges), frozenset(starts), frozenset(ends))

    def reach(self) -> dict[str, set[str]]:
        succ: dict[str, set[str]] = {a: set() for a in self.alphabet}
        for a, b in self.edges:
            succ[a].add(b)
        out = {}
        for a in self.alphabet:
            seen, stack = set(), list(succ[a])
            while stack:
                x = stack.pop()
                if x not in seen:
                    seen.add(x)
                    stack.extend(succ[x])
            out[a] = seen
        return out


def _components(nodes, linked: Callable[[str, str], bool]) -> Groups:
    parent = {n: n for n in nodes}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    ordered = sorted(nodes)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if linked(a, b):
                parent[find(a)] = find(b)
    groups: dict[str, set[str]] = {}
    for n in ordered:
        groups.setdefault(find(n), set()).add(n)
    return sorted((frozenset(g) for g in groups.values()), key=min)


def xor_cut(g: _Graph) -> Optional[Groups]:
    groups = _components(g.alphabet, lambda a, b: (a, b) in g.edges or (b, a) in g.edges)
    return groups if len(groups) > 1 else None


def sequence_cut(g: _Graph) -> Optional[Groups]:
    reach = g.reach()
    groups = _components(g.alphabet, lambda a, b: (b in reach[a]) == (a in reach[b]))
    if len(groups) < 2:
        return None

    def reached(group):
        return {b for a in group for b in reach[a]} - group

    groups.sort(key=lambda grp: (-len(reached(grp)), min(grp)))
    for i, gi in enumerate(groups):
        for gj in groups[i + 1:]:
            for a in gi:
                for b in gj:
                    if b not in reach[a] or a in reach[b]:
                        return None
    return groups


def parallel_cut(g: _Graph) -> Optional[Groups]:
    both = lambda a, b: (a, b) in g.edges and (b, a) in g.edges  # noqa: E731
    groups = _components(g.alphabet, lambda a, b: not both(a, b))
    while len(groups) > 1:
        lacking = next((grp for grp in groups if not (grp & g.starts and grp & g.ends)), None)
        if lacking is None:
            break
        others = [grp for grp in groups if grp is not lacking]
        merged = others[0] | lacking
        groups = sorted([merged, *others[1:]], key=min)
    return groups if len(groups) > 1 else None


def loop_cut(g: _Graph) -> Optional[Groups]:
    body = set(g.starts | g.ends)
    rest = [a for a in g.alphabet if a not in body]
    if not rest:
        return None
    comps = _components(rest, lambda a, b: (a, b) in g.edges or (b, a) in g.edges)
    redo: Groups = []
    for comp in comps:
        ok = True
        for x, y in g.edges:
            if x in body and y in comp:
                ok &= x in g.ends and all((e, y) in g.edges for e in g.ends)
            elif x in comp and y in body:
                ok &= y in g.starts and all((x, s) in g.edges for s in g.starts)
        if ok:
            redo.append(comp)
        else:
            body |= comp
    if not redo:
        return None
    return [frozenset(body), *redo]


def _project(log: SubLog, groups: Groups) -> list[SubLog]:
    out = [Counter() for _ in groups]
    for t, n in log.items():
        for i, grp in enumerate(groups):
            out[i][tuple(a for a in t if a in grp)] += n
    return out


def _split_xor(log: SubLog, groups: Groups) -> list[SubLog]:
    out = [Counter() for _ in groups]
    for t, n in log.items():
        i = next(i for i, grp in enumerate(groups) if t[0] in grp)
        out[i][t] += n
    return out


def _split_loop(log: SubLog, groups: Groups) -> list[SubLog]:
    out = [Counter() for _ in groups]
    index = {a: i for i, grp in enumerate(groups) for a in grp}
    for t, n in log.items():
        run: list[str] = []
        for a in t:
            if run and index[run[-1]] != index[a]:
                out[index[run[-1]]][tuple(run)] += n
                run = []
            run.append(a)
        out[index[run[-1]]][tuple(run)] += n
    return out


_CUTS = (
    (Operator.XOR, xor_cut, _split_xor),
    (Operator.SEQUENCE, sequence_cut, _project),
    (Operator.PARALLEL, parallel_cut, _project),
    (Operator.LOOP, loop_cut, _split_loop),
)


def _mine(log: SubLog) -> ProcessTree:
    if () in log:
        rest = Counter({t: n for t, n in log.items() if t})
        return xor(tau(), _mine(rest)) if rest else tau()
    g = _Graph.of(log)
    if len(g.alphabet) == 1:
        a = leaf(g.alphabet[0])
        return a if all(len(t) == 1 for t in log) else loop(a, tau())
    for op, detect, split in _CUTS:
        groups = detect(g)
        if groups:
            return ProcessTree(op, tuple(_mine(sub) for sub in split(log, groups)))
    return loop(xor(*(leaf(a) for a in g.alphabet)), tau())


def inductive_mine(log: LogLike) -> ProcessTree:
    traces: list[Trace] = as_traces(log)
    if not any(traces):
        raise EmptyLog("the log has no non-empty trace")
    return _mine(Counter(traces))
