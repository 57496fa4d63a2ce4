"""Seeded token playout of an annotated model into a transparency event log."""

from __future__ import annotations

import enum
import json
import math
import random
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Iterator, Mapping

from .conformance import extract_normative
from .errors import TiltBpmError, UnsoundModel
from .eventlog import Disclosure, EventLog, TransparencyEvent, ingest, normalize_label
from .model import BpmnModel, ElementClass, FlowKind

GENERATOR = "python-random-mt19937"
BASE_TIME = datetime(2024, 1, 1, tzinfo=timezone.utc)
_CHOICE_GATEWAYS = {"exclusiveGateway", "inclusiveGateway", "eventBasedGateway", "complexGateway"}


class DeviationKind(enum.Enum):
    DROP_CATEGORY = "DropCategory"
    ADD_CATEGORY = "AddCategory"
    SWAP_LEGAL_BASIS = "SwapLegalBasis"


@dataclass(frozen=True)
class DeviationSpec:
    kind: DeviationKind
    activity: str
    category: str = ""
    rate: float = 1.0
    # legal basis written by SwapLegalBasis
    replacement: str = "GDPR-6-1-f"

    def __post_init__(self):
        object.__setattr__(self, "kind", DeviationKind(self.kind))
        object.__setattr__(self, "activity", normalize_label(self.activity))
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"deviation rate {self.rate} outside [0, 1]")
        if self.kind is not DeviationKind.SWAP_LEGAL_BASIS and not self.category:
            raise ValueError(f"{self.kind.value} needs a category")


@dataclass(frozen=True)
class SimulationConfig:
    trace_count: int = 100
    seed: int = 0
    # gateway id -> outgoing sequence flow id -> probability
    branch_probabilities: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    deviations: tuple[DeviationSpec, ...] = ()
    max_steps: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "deviations", tuple(self.deviations))
        if self.trace_count < 0:
            raise ValueError("trace_count must be >= 0")
        for gw, dist in self.branch_probabilities.items():
            if any(p < 0 for p in dist.values()) or not math.isclose(sum(dist.values()), 1.0,
                                                                      abs_tol=1e-9):
                raise ValueError(f"branch probabilities of {gw!r} must be >= 0 and sum to 1")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SimulationConfig:
        return cls(
            trace_count=int(data.get("traces", 100)),
            seed=int(data.get("seed", 0)),
            branch_probabilities={k: dict(v) for k, v in data.get("branchProbabilities", {}).items()},
            deviations=tuple(
                DeviationSpec(
                    kind=DeviationKind(d["kind"]),
                    activity=d["activity"],
                    category=d.get("category", ""),
                    rate=float(d.get("rate", 1.0)),
                    **({"replacement": d["replacement"]} if "replacement" in d else {}),
                )
                for d in data.get("deviations", [])
            ),
        )

    @classmethod
    def load(cls, path: str | Path) -> SimulationConfig:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict[str, Any]:
        return {
            "traces": self.trace_count,
            "seed": self.seed,
            "branchProbabilities": {k: dict(v) for k, v in self.branch_probabilities.items()},
            "deviations": [
                {"kind": d.kind.value, "activity": d.activity, "category": d.category,
                 "rate": d.rate, "replacement": d.replacement}
                for d in self.deviations
            ],
        }


def _union(parts) -> tuple[str, ...]:
    return tuple(dict.fromkeys(x for part in parts for x in part))


class _Playout:
    def __init__(self, model: BpmnModel, config: SimulationConfig):
        self.model = model
        self.config = config
        self.elements = {e.id: e for e in model.elements}
        self.outgoing: dict[str, list[tuple[str, str]]] = defaultdict(list)
        self.incoming: Counter = Counter()
        for f in model.flows_of(FlowKind.SEQUENCE_FLOW):
            self.outgoing[f.source_id].append((f.id, f.target_id))
            self.incoming[f.target_id] += 1
        self.starts = [e.id for e in model.elements_of(ElementClass.START_EVENT)]
        if not self.starts:
            raise UnsoundModel("model has no start event")
        for gw, dist in config.branch_probabilities.items():
            flows = {fid for fid, _ in self.outgoing.get(gw, [])}
            if gw not in self.elements or set(dist) - flows:
                raise TiltBpmError(f"branch probabilities reference unknown flows of {gw!r}")

        normative = extract_normative(model)
        self.payload: dict[str, Disclosure] = {}
        for label, items in normative.disclosures.items():
            self.payload[label] = Disclosure(
                categories=_union([d.category] for d in items),
                purposes=_union(d.purposes for d in items),
                legal_bases=_union(d.legal_bases for d in items),
                recipients=_union(d.recipients for d in items),
                storage=_union(d.storage for d in items),
            )

    def _choose(self, rng: random.Random, node: str, outs: list[tuple[str, str]]) -> str:
        dist = self.config.branch_probabilities.get(node)
        weights = [dist.get(fid, 0.0) for fid, _ in outs] if dist else [1.0] * len(outs)
        total = sum(weights)
        r = rng.random() * total
        acc = 0.0
        for (fid, target), w in zip(outs, weights):
            acc += w
            if r < acc:
                return target
        return next(t for (_, t), w in zip(reversed(outs), reversed(weights)) if w > 0)

    def trace(self, rng: random.Random) -> list[str]:
        """Activity ids in execution order for one case."""
        pending = deque(self.starts)
        waiting: Counter = Counter()
        executed: list[str] = []
        ended = False
        steps = 0
        while pending:
            steps += 1
            if steps > self.config.max_steps:
                raise UnsoundModel(f"no completion within {self.config.max_steps} steps")
            node = pending.popleft()
            el = self.elements.get(node)
            if el is None:
                continue
            if el.tag == "parallelGateway" and self.incoming[node] > 1:
                waiting[node] += 1
                if waiting[node] < self.incoming[node]:
                    continue
                waiting[node] -= self.incoming[node]
            if el.element_class is ElementClass.ACTIVITY:
                executed.append(node)
            if el.element_class is ElementClass.END_EVENT:
                ended = True
            outs = self.outgoing.get(node, [])
            if len(outs) > 1 and el.tag in _CHOICE_GATEWAYS:
                pending.append(self._choose(rng, node, outs))
            else:
                pending.extend(t for _, t in outs)
        if +waiting or not ended:
            raise UnsoundModel("playout deadlocked before reaching an end event")
        return executed

    def disclosure(self, rng: random.Random, label: str) -> Disclosure:
        d = self.payload[label]
        cats, bases = list(d.categories), list(d.legal_bases)
        for dev in self.config.deviations:
            if dev.activity != label:
                continue
            if rng.random() >= dev.rate:
                continue
            if dev.kind is DeviationKind.DROP_CATEGORY:
                cats = [c for c in cats if c != dev.category]
            elif dev.kind is DeviationKind.ADD_CATEGORY:
                if dev.category not in cats:
                    cats.append(dev.category)
            else:
                bases = [dev.replacement]
        return Disclosure(tuple(cats), d.purposes, tuple(bases), d.recipients, d.storage)


def simulate(model: BpmnModel, config: SimulationConfig) -> Iterator[str]:
    """Yield JSON lines; a ``#`` header with seed and generator precedes the events."""
    playout = _Playout(model, config)
    rng = random.Random(config.seed)
    if config.trace_count == 0:
        return
    yield f"# tiltbpm simulate seed={config.seed} generator={GENERATOR} traces={config.trace_count}"
    eid = 0
    used: set[str] = set()
    for n in range(config.trace_count):
        case_id = f"0x{rng.getrandbits(64):016x}"
        while case_id in used:
            case_id = f"0x{rng.getrandbits(64):016x}"
        used.add(case_id)
        start = BASE_TIME + timedelta(minutes=n)
        for step, act_id in enumerate(playout.trace(rng), start=1):
            label = normalize_label(playout.elements[act_id].name)
            if label not in playout.payload:
                continue
            event = TransparencyEvent(eid, start + timedelta(seconds=step), case_id, label,
                                      playout.disclosure(rng, label))
            eid += 1
            yield event.to_line()


def simulate_log(model: BpmnModel, config: SimulationConfig) -> EventLog:
    return ingest(simulate(model, config), strict=True).log


def write_simulation(model: BpmnModel, config: SimulationConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in simulate(model, config):
            fh.write(line + "\n")
