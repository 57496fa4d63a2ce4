"""Assemble a process-centric TILT document from an annotated model."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .errors import MissingMeta
from .model import BpmnModel, DiagramKind, ElementClass
from .tilt import (
    TiltColumn,
    TiltFieldKind,
    allowed_columns,
    column_of,
    iter_annotations,
    payload_to_json,
)

PROVENANCE_KEY = "provenance"

# Rows that cannot occur in a plain process diagram.
_COLLABORATION_ONLY = {ElementClass.PARTICIPANT, ElementClass.MESSAGE_FLOW}

_NATURAL_KEY = {
    TiltFieldKind.META: ("name",),
    TiltFieldKind.CONTROLLER: ("name",),
    TiltFieldKind.DATA_PROTECTION_OFFICER: ("name",),
    TiltFieldKind.DATA_DISCLOSED: ("category", "id"),
    TiltFieldKind.THIRD_COUNTRY_TRANSFERS: ("country",),
    TiltFieldKind.ACCESS_AND_DATA_PORTABILITY: ("description",),
    TiltFieldKind.SOURCES: ("description",),
    TiltFieldKind.AUTOMATED_DECISION_MAKING: ("logicInvolved",),
    TiltFieldKind.CHANGES_OF_PURPOSE: ("description",),
}


def _natural_key(kind: TiltFieldKind, entry: dict[str, Any]) -> tuple:
    keys = _NATURAL_KEY.get(kind, ("description",))
    return tuple(str(entry.get(k, "")) for k in keys)


@dataclass
class TiltDocument:
    meta: dict[str, Any]
    sections: dict[TiltFieldKind, list[dict[str, Any]]] = field(default_factory=dict)
    additional_meta: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"meta": self.meta}
        for kind in TiltFieldKind:
            if kind is TiltFieldKind.META:
                continue
            out[kind.value] = self.sections.get(kind, [])
        out["additionalMeta"] = self.additional_meta
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def entries(self, kind: TiltFieldKind) -> list[dict[str, Any]]:
        if kind is TiltFieldKind.META:
            return [self.meta, *self.additional_meta]
        return self.sections.get(kind, [])


def export_tilt(model: BpmnModel) -> TiltDocument:
    """Collect every annotation, collapsing structural duplicates.

    Each entry lists the ids of the elements that carry it under
    ``provenance``.  Lists are ordered by a field-specific natural key, then
    provenance, so output is diff-friendly.
    """
    grouped: dict[TiltFieldKind, dict[str, tuple[dict, list[str]]]] = {k: {} for k in TiltFieldKind}
    for item, ann in iter_annotations(model):
        payload = payload_to_json(ann.payload)
        key = json.dumps(payload, sort_keys=True)
        slot = grouped[ann.field].setdefault(key, (payload, []))
        if item.id not in slot[1]:
            slot[1].append(item.id)

    sections: dict[TiltFieldKind, list[dict]] = {}
    for kind, entries in grouped.items():
        rows = [{**payload, PROVENANCE_KEY: ids} for payload, ids in entries.values()]
        rows.sort(key=lambda r: (_natural_key(kind, r), r[PROVENANCE_KEY],
                                 json.dumps(r, sort_keys=True)))
        sections[kind] = rows

    metas = sections.pop(TiltFieldKind.META)
    if not metas:
        raise MissingMeta("no meta annotation found; the document has no identity")
    first_meta_id = next(i for i, a in iter_annotations(model) if a.field is TiltFieldKind.META).id
    metas.sort(key=lambda r: first_meta_id not in r[PROVENANCE_KEY])
    return TiltDocument(meta=metas[0], sections=sections, additional_meta=metas[1:])


def applicable_columns(diagram_kind: DiagramKind) -> list[TiltColumn]:
    """Columns with at least one legal host that can exist in ``diagram_kind``."""
    rows = [c for c in ElementClass
            if diagram_kind is DiagramKind.COLLABORATION or c not in _COLLABORATION_ONLY]
    found = set()
    for cls in rows:
        found |= allowed_columns(cls, diagram_kind)
    return [c for c in TiltColumn if c in found]


def completeness(model: BpmnModel) -> dict[TiltColumn, bool]:
    """For each applicable column, whether the model carries at least one annotation of it."""
    present = {column_of(ann.field) for _, ann in iter_annotations(model)}
    return {col: col in present for col in applicable_columns(model.diagram_kind)}
