from __future__ import annotations

import dataclasses
import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import events
from tiltbpm import fixtures as fx
from tiltbpm.bpmn import parse_bpmn, serialize_bpmn
from tiltbpm.conformance import (
    BLUE_FILL,
    ORANGE_FILL,
    Classification,
    ConformanceReport,
    Highlight,
    NormativeDisclosureMap,
    annotate_diagram,
    check,
    colored_shapes,
    extract_normative,
    observe,
)
from tiltbpm.discovery import inductive_mine, tree_to_bpmn
from tiltbpm.errors import UnknownActivity
from tiltbpm.eventlog import Disclosure, EventLog, TransparencyEvent, ingest
from tiltbpm.model import BpmnElement, BpmnModel, ElementClass, Flow, FlowKind, ProcessInfo
from tiltbpm.tilt import DataDisclosed, Origin, TiltAnnotation, TiltFieldKind

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
COLLECT = fx.COLLECT


def dd(cat, purposes=("p",), bases=("b",)):
    return DataDisclosed(cat, cat, purposes, bases)


def normative(**acts) -> NormativeDisclosureMap:
    return NormativeDisclosureMap({k.replace("_", " "): tuple(dd(c) for c in v)
                                   for k, v in acts.items()},
                                  frozenset(k.replace("_", " ") for k in acts))


def log_of(*events_: tuple[str, tuple[str, ...]], purposes=("p",), bases=("b",)) -> EventLog:
    return EventLog.from_events(
        TransparencyEvent(i, T0, "c1", act, Disclosure(cats, purposes, bases))
        for i, (act, cats) in enumerate(events_))


def classes(report) -> dict[tuple[str, str], Classification]:
    return {(e.activity, e.category): e.classification for e in report.entries}


class TestExtractNormative:
    def test_fixture(self, checkout):
        norm = extract_normative(checkout)
        assert [d.category for d in norm.disclosures[COLLECT]] == ["postcode", "street"]
        assert set(norm.activities) == {fx.COLLECT, fx.VALIDATE, fx.PAY, fx.UPDATE, fx.CONFIRM}

    def test_unannotated(self):
        m = BpmnModel(elements=(BpmnElement("T", ElementClass.ACTIVITY, name="A",
                                            process_id="P"),), processes=(ProcessInfo("P"),))
        norm = extract_normative(m)
        assert norm.disclosures == {} and norm.activities == {"A"}

    def test_data_object_propagates_to_associated_activities(self):
        pid = "P"
        obj = BpmnElement("D", ElementClass.DATA_OBJECT_REFERENCE, process_id=pid,
                          annotations=(TiltAnnotation(TiltFieldKind.DATA_DISCLOSED, dd("email")),))
        m = BpmnModel(
            elements=(BpmnElement("T1", ElementClass.ACTIVITY, name="Write", process_id=pid),
                      BpmnElement("T2", ElementClass.ACTIVITY, name="Read", process_id=pid),
                      BpmnElement("T3", ElementClass.ACTIVITY, name="Other", process_id=pid), obj),
            flows=(Flow("O1", FlowKind.DATA_ASSOCIATION, "T1", "D", tag="dataOutputAssociation"),
                   Flow("I1", FlowKind.DATA_ASSOCIATION, "D", "T2", tag="dataInputAssociation")),
            processes=(ProcessInfo(pid),))
        norm = extract_normative(m)
        assert set(norm.disclosures) == {"Write", "Read"}
        assert norm.disclosures["Read"] == (dd("email"),)


class TestCheck:
    def test_undeclared(self):
        report = check(normative(Collect_user_data=["postcode"]),
                       log_of((COLLECT, ("postcode", "email"))))
        assert classes(report) == {(COLLECT, "postcode"): Classification.CONFORMING,
                                   (COLLECT, "email"): Classification.UNDECLARED}
        assert report.highlights() == {COLLECT: Highlight.ORANGE}

    def test_missing(self):
        report = check(normative(Collect_user_data=["postcode", "street"]),
                       log_of((COLLECT, ("postcode",))))
        assert classes(report)[(COLLECT, "street")] is Classification.MISSING
        assert report.highlights() == {COLLECT: Highlight.BLUE}
        assert report.missing[0].highlight is Highlight.BLUE

    def test_exact_match(self):
        report = check(normative(A=["x"]), log_of(("A", ("x",))))
        assert not report.has_deviations and report.highlights() == {}
        assert report.entries[0].highlight is None

    def test_mixed_is_orange(self):
        report = check(normative(A=["x", "y"]), log_of(("A", ("x", "z"))))
        assert report.highlights() == {"A": Highlight.ORANGE}

    def test_unmodeled_activity(self):
        report = check(normative(A=["x"]), log_of(("A", ("x",)), ("Z", ("q",))))
        assert report.unmodeled_activities == ("Z",)
        assert classes(report)[("Z", "q")] is Classification.UNDECLARED

    def test_unobserved_activity(self):
        report = check(normative(A=["x"], B=["y"]), log_of(("A", ("x",))))
        assert report.unobserved_activities == ("B",)
        assert classes(report)[("B", "y")] is Classification.MISSING

    def test_attribute_diffs(self):
        report = check(normative(A=["x"]), log_of(("A", ("x",)), purposes=("q",), bases=("b",)))
        assert classes(report) == {("A", "x"): Classification.CONFORMING}
        (diff,) = report.attribute_diffs
        assert (diff.missing_purposes, diff.undeclared_purposes) == (("p",), ("q",))
        assert diff.missing_legal_bases == diff.undeclared_legal_bases == ()

    def test_report_json_round_trip(self):
        report = check(normative(A=["x", "y"]), log_of(("A", ("x", "z")), purposes=("q",)))
        again = ConformanceReport.from_dict(json.loads(report.to_json()))
        assert again == report and again.to_json() == report.to_json()

    def test_render_text(self):
        report = check(normative(A=["x", "y"]), log_of(("A", ("x", "z"))))
        text = report.render_text()
        assert text.splitlines()[0].split() == ["ACTIVITY", "CATEGORY", "CLASSIFICATION",
                                                "HIGHLIGHT"]
        assert "1 conforming, 1 missing, 1 undeclared" in text

    @settings(max_examples=60, deadline=None)
    @given(events(), events())
    def test_partition(self, modeled, logged):
        norm_log = EventLog.from_events(modeled)
        norm = NormativeDisclosureMap(
            {act: tuple(o.to_data_disclosed() for o in cats.values())
             for act, cats in observe(norm_log).disclosures.items()},
            norm_log.activity_alphabet)
        report = check(norm, EventLog.from_events(logged))
        keys = [(e.activity, e.category) for e in report.entries]
        assert len(keys) == len(set(keys))
        expected = {(a, d.category) for a, ds in norm.disclosures.items() for d in ds}
        observed = {(e.activity, c) for e in logged for c in e.disclosed.categories}
        assert set(keys) == expected | observed
        for key, cls in classes(report).items():
            assert (cls is Classification.CONFORMING) == (key in expected and key in observed)
            assert (cls is Classification.MISSING) == (key in expected and key not in observed)
            assert (cls is Classification.UNDECLARED) == (key not in expected and key in observed)

    @settings(max_examples=60, deadline=None)
    @given(events())
    def test_symmetry(self, evs):
        log = EventLog.from_events(evs)
        obs = observe(log)
        norm = NormativeDisclosureMap(
            {act: tuple(o.to_data_disclosed() for o in cats.values())
             for act, cats in obs.disclosures.items()},
            log.activity_alphabet)
        report = check(norm, log)
        assert all(e.classification is Classification.CONFORMING for e in report.entries)
        assert report.attribute_diffs == ()

    @settings(max_examples=60, deadline=None)
    @given(events(), st.sampled_from(["A", "B", "C"]), st.sampled_from(["new1", "x", "postcode"]))
    def test_monotone_undeclared(self, evs, act, cat):
        norm = normative(A=["postcode"], B=["x"])
        before = {(e.activity, e.category) for e in check(norm, EventLog.from_events(evs)).undeclared}
        extra = TransparencyEvent(10_000, T0, "c9", act, Disclosure((cat,)))
        after = {(e.activity, e.category)
                 for e in check(norm, EventLog.from_events([*evs, extra])).undeclared}
        assert before <= after


class TestAnnotate:
    def test_blue_on_normative(self, checkout):
        report = check(extract_normative(checkout),
                       log_of((fx.UPDATE, ("street",))))  # postcode missing
        out = annotate_diagram(checkout, report)
        assert colored_shapes(out)["Activity_UpdateBillingAddress"] == BLUE_FILL

    def test_orange_on_normative(self, checkout):
        norm = extract_normative(checkout)
        report = check(norm, log_of((COLLECT, ("postcode", "street", "email"))))
        out = annotate_diagram(checkout, report)
        assert colored_shapes(out)["Activity_CollectUserData"] == ORANGE_FILL
        text = serialize_bpmn(out)
        assert 'bioc:fill="#FFE0B2"' in text and 'color:background-color="#FFE0B2"' in text

    def test_no_highlights_unchanged(self, checkout):
        assert serialize_bpmn(annotate_diagram(checkout, ConformanceReport())) == \
            serialize_bpmn(checkout)

    def test_non_diagram_content_preserved(self, checkout):
        report = check(extract_normative(checkout), log_of((COLLECT, ("email",))))
        out = annotate_diagram(checkout, report)
        restored = dataclasses.replace(out, diagram_interchange=checkout.diagram_interchange,
                                       namespaces=checkout.namespaces)
        assert serialize_bpmn(restored) == serialize_bpmn(checkout)
        assert parse_bpmn(serialize_bpmn(out)) == out

    def test_unknown_label(self, checkout):
        report = ConformanceReport(entries=(
            check(normative(Ghost=["x"]), log_of(("Ghost", ("y",)))).entries))
        with pytest.raises(UnknownActivity):
            annotate_diagram(checkout, report)

    def test_discovered_gets_observed_disclosures(self):
        log = log_of(("A", ("x", "y")), ("B", ("z",)))
        report = check(normative(A=["x"], B=["z"]), log)
        discovered = annotate_diagram(tree_to_bpmn(inductive_mine(log)), report,
                                      attach_observed=True)
        a = next(e for e in discovered.elements if e.name == "A")
        assert [x.payload.category for x in a.annotations] == ["x", "y"]
        assert all(x.origin is Origin.AUTO_FILLED for x in a.annotations)
        assert list(colored_shapes(discovered).values()) == [ORANGE_FILL]


class TestFixtureReports:
    @pytest.mark.parametrize("name", list(fx.LOGS))
    def test_committed_reports_match(self, checkout, fixture_dir, name):
        lines = (fixture_dir / f"{name}.jsonl").read_text(encoding="utf-8").splitlines()
        result = ingest(lines)
        assert result.rejects == []
        report = check(extract_normative(checkout), result.log)
        assert report.to_json() == (fixture_dir / f"{name}.report.json").read_text(encoding="utf-8")

    def test_expected_shapes(self, fixture_dir):
        load = lambda n: json.loads((fixture_dir / f"{n}.report.json").read_text())  # noqa: E731
        assert load("clean")["summary"]["missing"] == load("clean")["summary"]["undeclared"] == 0
        assert load("drop-street")["highlights"] == {COLLECT: "blue"}
        assert load("add-email")["highlights"] == {COLLECT: "orange"}
