from __future__ import annotations

import dataclasses
import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import data_disclosed
from tiltbpm.errors import MissingMeta
from tiltbpm.export import PROVENANCE_KEY, applicable_columns, completeness, export_tilt
from tiltbpm.model import BpmnElement, BpmnModel, DiagramKind, ElementClass, ProcessInfo
from tiltbpm.tilt import (
    Meta,
    TiltAnnotation,
    TiltColumn,
    TiltFieldKind,
    iter_annotations,
    payload_to_json,
)

K = TiltFieldKind
META = TiltAnnotation(K.META, Meta("Only meta", "2024-01-01T00:00:00Z", "2024-01-01T00:00:00Z", 1))


def meta_only() -> BpmnModel:
    return BpmnModel(elements=(BpmnElement("S", ElementClass.START_EVENT, process_id="P",
                                           annotations=(META,)),),
                     processes=(ProcessInfo("P"),))


def strip(model: BpmnModel, kind: TiltFieldKind) -> BpmnModel:
    for item in model.iter_items():
        kept = tuple(a for a in item.annotations if a.field is not kind)
        if kept != item.annotations:
            model = model.replace_item(dataclasses.replace(item, annotations=kept))
    return model


class TestExport:
    def test_fixture_controller(self, checkout):
        doc = export_tilt(checkout).to_dict()
        ctrl = dict(doc["controller"][0])
        assert ctrl.pop(PROVENANCE_KEY) == ["Participant_Shop"]
        assert ctrl == {"name": "Chocolate Factory", "division": "Compliance", "country": "DE",
                        "representative": {"name": "Charlie"}}

    def test_meta_only(self):
        doc = export_tilt(meta_only()).to_dict()
        assert doc["meta"]["name"] == "Only meta"
        assert doc["additionalMeta"] == []
        for key, value in doc.items():
            if key not in ("meta", "additionalMeta"):
                assert value == [], key

    def test_missing_meta(self, checkout):
        with pytest.raises(MissingMeta):
            export_tilt(strip(checkout, K.META))

    def test_keys_are_field_names(self, checkout):
        doc = export_tilt(checkout).to_dict()
        assert set(doc) == {k.value for k in TiltFieldKind} | {"additionalMeta"}

    def test_json_format(self, checkout):
        text = export_tilt(checkout).to_json()
        assert text.endswith("}\n") and text.startswith('{\n  "meta"')
        assert json.loads(text) == export_tilt(checkout).to_dict()

    def test_idempotent(self, checkout):
        assert export_tilt(checkout).to_json() == export_tilt(checkout).to_json()

    def test_no_annotation_dropped(self, checkout):
        """Every annotation's payload and host id appear in the document."""
        doc = export_tilt(checkout)
        for item, ann in iter_annotations(checkout):
            payload = payload_to_json(ann.payload)
            hits = [e for e in doc.entries(ann.field)
                    if {k: v for k, v in e.items() if k != PROVENANCE_KEY} == payload]
            assert len(hits) == 1
            assert item.id in hits[0][PROVENANCE_KEY]

    def test_first_meta_is_primary(self):
        second = TiltAnnotation(K.META, Meta("Sub process"))
        model = BpmnModel(elements=(
            BpmnElement("S1", ElementClass.START_EVENT, process_id="P", annotations=(META,)),
            BpmnElement("S2", ElementClass.START_EVENT, process_id="P", annotations=(second,)),
        ), processes=(ProcessInfo("P"),))
        doc = export_tilt(model)
        assert doc.meta["name"] == "Only meta"
        assert [m["name"] for m in doc.additional_meta] == ["Sub process"]
        assert doc.additional_meta[0][PROVENANCE_KEY] == ["S2"]

    @settings(max_examples=50, deadline=None)
    @given(st.lists(data_disclosed(), min_size=1, max_size=6),
           st.lists(st.integers(0, 2), min_size=1, max_size=6))
    def test_dedup_bounds(self, payloads, hosts):
        """|entries| <= |annotations|, equal iff there are no structural duplicates."""
        elements = [BpmnElement("S", ElementClass.START_EVENT, process_id="P", annotations=(META,))]
        per_host: dict[int, list] = {0: [], 1: [], 2: []}
        for p, h in zip(payloads, hosts * len(payloads)):
            per_host[h].append(TiltAnnotation(K.DATA_DISCLOSED, p))
        for h, anns in per_host.items():
            elements.append(BpmnElement(f"T{h}", ElementClass.ACTIVITY, process_id="P",
                                        annotations=tuple(anns)))
        model = BpmnModel(elements=tuple(elements), processes=(ProcessInfo("P"),))
        entries = export_tilt(model).entries(K.DATA_DISCLOSED)
        annotations = [a for _, a in iter_annotations(model) if a.field is K.DATA_DISCLOSED]
        distinct = {json.dumps(payload_to_json(a.payload), sort_keys=True) for a in annotations}
        assert len(entries) <= len(annotations)
        assert len(entries) == len(distinct)
        assert (len(entries) == len(annotations)) == (len(distinct) == len(annotations))
        keys = Counter(json.dumps({k: v for k, v in e.items() if k != PROVENANCE_KEY},
                                  sort_keys=True) for e in entries)
        assert max(keys.values()) == 1


class TestCompleteness:
    def test_fixture_is_complete(self, checkout):
        report = completeness(checkout)
        assert set(report) == set(TiltColumn)
        assert all(report.values())

    def test_empty_model(self):
        report = completeness(BpmnModel())
        assert report and not any(report.values())

    def test_remove_one(self, checkout):
        report = completeness(strip(checkout, K.THIRD_COUNTRY_TRANSFERS))
        assert [c for c, ok in report.items() if not ok] == [TiltColumn.THIRD_COUNTRY_TRANSFERS]

    def test_process_diagrams_have_no_transfer_column(self):
        assert TiltColumn.THIRD_COUNTRY_TRANSFERS not in applicable_columns(DiagramKind.PROCESS)
        assert TiltColumn.THIRD_COUNTRY_TRANSFERS in applicable_columns(DiagramKind.COLLABORATION)
        assert len(applicable_columns(DiagramKind.COLLABORATION)) == 10
