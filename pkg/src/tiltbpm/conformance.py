"""Compare modeled data disclosures with those observed in an event log."""

from __future__ import annotations

import dataclasses
import enum
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Mapping

from lxml import etree

from .bpmn import canonical
from .errors import UnknownActivity
from .eventlog import EventLog, flatten_disclosed, normalize_label
from .layout import with_layout
from .model import BIOC_NS, BPMNDI_NS, COLOR_NS, BpmnModel, ElementClass, FlowKind
from .tilt import DataDisclosed, Origin, TiltAnnotation, TiltFieldKind, attach

BLUE_FILL, BLUE_STROKE = "#BBDEFB", "#1E88E5"
ORANGE_FILL, ORANGE_STROKE = "#FFE0B2", "#FB8C00"


class Classification(enum.Enum):
    CONFORMING = "Conforming"
    MISSING = "Missing"
    UNDECLARED = "Undeclared"


class Highlight(enum.Enum):
    BLUE = "blue"
    ORANGE = "orange"

    @property
    def colors(self) -> tuple[str, str]:
        return (BLUE_FILL, BLUE_STROKE) if self is Highlight.BLUE else (ORANGE_FILL, ORANGE_STROKE)


_HIGHLIGHT = {
    Classification.CONFORMING: None,
    Classification.MISSING: Highlight.BLUE,
    Classification.UNDECLARED: Highlight.ORANGE,
}


@dataclass(frozen=True)
class NormativeDisclosureMap:
    disclosures: Mapping[str, tuple[DataDisclosed, ...]] = field(default_factory=dict)
    # every activity label of the model, annotated or not
    activities: frozenset[str] = frozenset()

    def categories(self, activity: str) -> dict[str, tuple[set[str], set[str]]]:
        out: dict[str, tuple[set[str], set[str]]] = {}
        for d in self.disclosures.get(activity, ()):
            purposes, bases = out.setdefault(d.category, (set(), set()))
            purposes.update(d.purposes)
            bases.update(d.legal_bases)
        return out


@dataclass(frozen=True)
class ObservedDisclosure:
    activity: str
    category: str
    count: int
    purposes: tuple[str, ...] = ()
    legal_bases: tuple[str, ...] = ()
    recipients: tuple[str, ...] = ()
    storage: tuple[str, ...] = ()

    def to_data_disclosed(self) -> DataDisclosed:
        return DataDisclosed(self.category, self.category, self.purposes, self.legal_bases,
                             self.recipients, self.storage)


@dataclass(frozen=True)
class ObservedDisclosureMap:
    disclosures: Mapping[str, Mapping[str, ObservedDisclosure]] = field(default_factory=dict)
    activity_counts: Mapping[str, int] = field(default_factory=dict)


def extract_normative(model: BpmnModel) -> NormativeDisclosureMap:
    activities = model.elements_of(ElementClass.ACTIVITY)
    labels = {a.id: normalize_label(a.name) for a in activities}
    collected: dict[str, list[DataDisclosed]] = defaultdict(list)

    def add(label: str, payload: DataDisclosed):
        if label and payload not in collected[label]:
            collected[label].append(payload)

    for act in activities:
        for ann in act.annotations:
            if ann.field is TiltFieldKind.DATA_DISCLOSED:
                add(labels[act.id], ann.payload)
    data_objects = {e.id: e for e in model.elements_of(ElementClass.DATA_OBJECT_REFERENCE)}
    for f in model.flows_of(FlowKind.DATA_ASSOCIATION):
        for data_id, other in ((f.source_id, f.target_id), (f.target_id, f.source_id)):
            if data_id in data_objects and other in labels:
                for ann in data_objects[data_id].annotations:
                    if ann.field is TiltFieldKind.DATA_DISCLOSED:
                        add(labels[other], ann.payload)
    return NormativeDisclosureMap(
        {k: tuple(collected[k]) for k in sorted(collected)},
        frozenset(v for v in labels.values() if v),
    )


def observe(log: EventLog) -> ObservedDisclosureMap:
    counts: Counter = Counter()
    acc: dict[str, dict[str, dict[str, Any]]] = defaultdict(dict)
    for event in log.events():
        counts[event.activity] += 1
        for d in flatten_disclosed(event):
            slot = acc[event.activity].setdefault(
                d.category, {"n": 0, "p": set(), "l": set(), "r": set(), "s": set()})
            slot["n"] += 1
            slot["p"].update(d.purposes)
            slot["l"].update(d.legal_bases)
            slot["r"].update(d.recipients)
            slot["s"].update(d.storage)
    out = {
        act: {
            cat: ObservedDisclosure(act, cat, s["n"], tuple(sorted(s["p"])), tuple(sorted(s["l"])),
                                    tuple(sorted(s["r"])), tuple(sorted(s["s"])))
            for cat, s in sorted(cats.items())
        }
        for act, cats in sorted(acc.items())
    }
    return ObservedDisclosureMap(out, dict(sorted(counts.items())))


@dataclass(frozen=True)
class ReportEntry:
    activity: str
    category: str
    classification: Classification

    @property
    def highlight(self) -> Highlight | None:
        return _HIGHLIGHT[self.classification]


@dataclass(frozen=True)
class AttributeDiff:
    activity: str
    category: str
    missing_purposes: tuple[str, ...] = ()
    undeclared_purposes: tuple[str, ...] = ()
    missing_legal_bases: tuple[str, ...] = ()
    undeclared_legal_bases: tuple[str, ...] = ()


@dataclass(frozen=True)
class ConformanceReport:
    entries: tuple[ReportEntry, ...] = ()
    attribute_diffs: tuple[AttributeDiff, ...] = ()
    unobserved_activities: tuple[str, ...] = ()
    unmodeled_activities: tuple[str, ...] = ()
    observed: tuple[ObservedDisclosure, ...] = ()

    def of(self, classification: Classification) -> list[ReportEntry]:
        return [e for e in self.entries if e.classification is classification]

    @property
    def missing(self) -> list[ReportEntry]:
        return self.of(Classification.MISSING)

    @property
    def undeclared(self) -> list[ReportEntry]:
        return self.of(Classification.UNDECLARED)

    @property
    def has_deviations(self) -> bool:
        return bool(self.missing or self.undeclared)

    @property
    def summary(self) -> dict[str, int]:
        counts = Counter(e.classification for e in self.entries)
        return {
            "conforming": counts[Classification.CONFORMING],
            "missing": counts[Classification.MISSING],
            "undeclared": counts[Classification.UNDECLARED],
            "attributeDiffs": len(self.attribute_diffs),
            "unobservedActivities": len(self.unobserved_activities),
            "unmodeledActivities": len(self.unmodeled_activities),
        }

    def highlights(self) -> dict[str, Highlight]:
        """Activity label to color; undeclared processing wins over missing."""
        seen: dict[str, set[Highlight]] = defaultdict(set)
        for e in self.entries:
            if e.highlight is not None:
                seen[e.activity].add(e.highlight)
        return {
            label: Highlight.ORANGE if Highlight.ORANGE in hs else Highlight.BLUE
            for label, hs in sorted(seen.items())
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "summary": self.summary,
            "entries": [
                {"activity": e.activity, "category": e.category,
                 "classification": e.classification.value,
                 "highlight": e.highlight.value if e.highlight else None}
                for e in self.entries
            ],
            "attributeDiffs": [
                {"activity": d.activity, "category": d.category,
                 "missingPurposes": list(d.missing_purposes),
                 "undeclaredPurposes": list(d.undeclared_purposes),
                 "missingLegalBases": list(d.missing_legal_bases),
                 "undeclaredLegalBases": list(d.undeclared_legal_bases)}
                for d in self.attribute_diffs
            ],
            "unobservedActivities": list(self.unobserved_activities),
            "unmodeledActivities": list(self.unmodeled_activities),
            "highlights": {k: v.value for k, v in self.highlights().items()},
            "observed": [
                {"activity": o.activity, "category": o.category, "count": o.count,
                 "purposes": list(o.purposes), "legalBases": list(o.legal_bases),
                 "recipients": list(o.recipients), "storage": list(o.storage)}
                for o in self.observed
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ConformanceReport:
        return cls(
            entries=tuple(ReportEntry(e["activity"], e["category"], Classification(e["classification"]))
                          for e in data.get("entries", [])),
            attribute_diffs=tuple(
                AttributeDiff(d["activity"], d["category"], tuple(d["missingPurposes"]),
                              tuple(d["undeclaredPurposes"]), tuple(d["missingLegalBases"]),
                              tuple(d["undeclaredLegalBases"]))
                for d in data.get("attributeDiffs", [])),
            unobserved_activities=tuple(data.get("unobservedActivities", [])),
            unmodeled_activities=tuple(data.get("unmodeledActivities", [])),
            observed=tuple(
                ObservedDisclosure(o["activity"], o["category"], o["count"], tuple(o["purposes"]),
                                   tuple(o["legalBases"]), tuple(o["recipients"]), tuple(o["storage"]))
                for o in data.get("observed", [])),
        )

    def render_text(self) -> str:
        rows = [("ACTIVITY", "CATEGORY", "CLASSIFICATION", "HIGHLIGHT")]
        rows += [(e.activity, e.category, e.classification.value,
                  e.highlight.value if e.highlight else "-") for e in self.entries]
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        s = self.summary
        lines.append("")
        lines.append(f"{s['conforming']} conforming, {s['missing']} missing, "
                     f"{s['undeclared']} undeclared")
        for d in self.attribute_diffs:
            parts = []
            for label, vals in (("missing purposes", d.missing_purposes),
                                ("undeclared purposes", d.undeclared_purposes),
                                ("missing legal bases", d.missing_legal_bases),
                                ("undeclared legal bases", d.undeclared_legal_bases)):
                if vals:
                    parts.append(f"{label}: {', '.join(vals)}")
            lines.append(f"attribute diff {d.activity} / {d.category}: {'; '.join(parts)}")
        if self.unobserved_activities:
            lines.append("never observed: " + ", ".join(self.unobserved_activities))
        if self.unmodeled_activities:
            lines.append("not in model: " + ", ".join(self.unmodeled_activities))
        return "\n".join(lines) + "\n"


def check(normative: NormativeDisclosureMap, log: EventLog | ObservedDisclosureMap) -> ConformanceReport:
    observed = log if isinstance(log, ObservedDisclosureMap) else observe(log)
    entries: list[ReportEntry] = []
    diffs: list[AttributeDiff] = []
    labels = sorted(set(normative.disclosures) | set(observed.disclosures))
    for act in labels:
        norm = normative.categories(act)
        obs = observed.disclosures.get(act, {})
        for cat in sorted(set(norm) | set(obs)):
            if cat in norm and cat in obs:
                entries.append(ReportEntry(act, cat, Classification.CONFORMING))
                np_, nl = norm[cat]
                op, ol = set(obs[cat].purposes), set(obs[cat].legal_bases)
                if np_ != op or nl != ol:
                    diffs.append(AttributeDiff(
                        act, cat, tuple(sorted(np_ - op)), tuple(sorted(op - np_)),
                        tuple(sorted(nl - ol)), tuple(sorted(ol - nl))))
            elif cat in norm:
                entries.append(ReportEntry(act, cat, Classification.MISSING))
            else:
                entries.append(ReportEntry(act, cat, Classification.UNDECLARED))
    seen = set(observed.activity_counts)
    return ConformanceReport(
        entries=tuple(entries),
        attribute_diffs=tuple(diffs),
        unobserved_activities=tuple(sorted(normative.activities - seen)),
        unmodeled_activities=tuple(sorted(seen - normative.activities)),
        observed=tuple(o for act in observed.disclosures.values() for o in act.values()),
    )


def _color_shapes(diagram_xml: str, colors: Mapping[str, tuple[str, str]]) -> str:
    root = etree.fromstring(diagram_xml)
    for shape in root.iter(f"{{{BPMNDI_NS}}}BPMNShape"):
        ref = shape.get("bpmnElement")
        if ref in colors:
            fill, stroke = colors[ref]
            shape.set(f"{{{BIOC_NS}}}fill", fill)
            shape.set(f"{{{BIOC_NS}}}stroke", stroke)
            shape.set(f"{{{COLOR_NS}}}background-color", fill)
            shape.set(f"{{{COLOR_NS}}}border-color", stroke)
    # keep the conventional prefixes instead of generated ns0/ns1
    etree.cleanup_namespaces(root, top_nsmap={"bioc": BIOC_NS, "color": COLOR_NS})
    return canonical(root)


def annotate_diagram(base: BpmnModel, report: ConformanceReport,
                     attach_observed: bool = False) -> BpmnModel:
    """Color activity shapes by highlight and optionally attach observed disclosures.

    Labels listed as unobserved or unmodeled are allowed to be absent from
    ``base``; any other label the report mentions must exist there.
    """
    ids_by_label: dict[str, list[str]] = defaultdict(list)
    for act in base.elements_of(ElementClass.ACTIVITY):
        ids_by_label[normalize_label(act.name)].append(act.id)
    exempt = set(report.unobserved_activities) | set(report.unmodeled_activities)
    mentioned = {e.activity for e in report.entries}
    unknown = sorted(l for l in mentioned if l not in ids_by_label and l not in exempt)
    if unknown:
        raise UnknownActivity(f"labels not found in the diagram: {', '.join(unknown)}")

    model = base
    if attach_observed:
        for obs in report.observed:
            for act_id in ids_by_label.get(obs.activity, []):
                ann = TiltAnnotation(TiltFieldKind.DATA_DISCLOSED, obs.to_data_disclosed(),
                                     Origin.AUTO_FILLED)
                if ann not in model.get(act_id).annotations:
                    model = attach(model, act_id, ann)

    colors = {
        act_id: h.colors
        for label, h in report.highlights().items()
        for act_id in ids_by_label.get(label, [])
    }
    if not colors:
        return model
    if not model.diagram_interchange:
        model = with_layout(model)
    namespaces = dict(model.namespaces)
    namespaces.setdefault("bioc", BIOC_NS)
    namespaces.setdefault("color", COLOR_NS)
    di = list(model.diagram_interchange)
    di[0] = _color_shapes(di[0], colors)
    return dataclasses.replace(model, diagram_interchange=tuple(di), namespaces=namespaces)


def colored_shapes(model: BpmnModel) -> dict[str, str]:
    """bpmnElement id to fill color for every colored shape in ``model``."""
    out = {}
    for chunk in model.diagram_interchange:
        for shape in etree.fromstring(chunk).iter(f"{{{BPMNDI_NS}}}BPMNShape"):
            fill = shape.get(f"{{{BIOC_NS}}}fill")
            if fill:
                out[shape.get("bpmnElement")] = fill
    return out

