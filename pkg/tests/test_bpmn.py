from __future__ import annotations

import pytest
from hypothesis import given, settings

from strategies import linear_processes
from tiltbpm import fixtures as fx
from tiltbpm.bpmn import normalize, parse_bpmn, read_bpmn, serialize_bpmn, write_bpmn
from tiltbpm.errors import MalformedXml, SchemaViolation, UnknownTiltField
from tiltbpm.model import BpmnElement, DiagramKind, ElementClass, FlowKind

HEAD = ('<?xml version="1.0" encoding="UTF-8"?>\n'
        '<bpmn:definitions xmlns:bpmn="http://www.omg.org/spec/BPMN/20100524/MODEL" '
        'xmlns:tilt="http://tilt-bpmn.org/schema/v1" xmlns:foo="urn:foo" '
        'id="Defs" targetNamespace="urn:t">')
TAIL = "</bpmn:definitions>"


def doc(body: str) -> str:
    return HEAD + body + TAIL


SIMPLE = doc("""
<bpmn:process id="P">
  <bpmn:startEvent id="S"/>
  <bpmn:userTask id="T" name="Do it">
    <bpmn:extensionElements>
      <foo:bar x="1"/>
      <tilt:dataDisclosed id="email" category="email">
        <tilt:purpose>contact</tilt:purpose>
      </tilt:dataDisclosed>
    </bpmn:extensionElements>
  </bpmn:userTask>
  <bpmn:intermediateThrowEvent id="I"/>
  <bpmn:endEvent id="E"/>
  <bpmn:sequenceFlow id="F1" sourceRef="S" targetRef="T"/>
  <bpmn:sequenceFlow id="F2" sourceRef="T" targetRef="I"/>
  <bpmn:sequenceFlow id="F3" sourceRef="I" targetRef="E"/>
</bpmn:process>
""")


class TestParse:
    def test_classes_and_subtypes(self):
        m = parse_bpmn(SIMPLE)
        task = m.element("T")
        assert task.element_class is ElementClass.ACTIVITY and task.tag == "userTask"
        assert m.diagram_kind is DiagramKind.PROCESS
        assert [f.id for f in m.flows_of(FlowKind.SEQUENCE_FLOW)] == ["F1", "F2", "F3"]

    def test_unknown_constructs_preserved(self):
        m = parse_bpmn(SIMPLE)
        assert "I" in m.opaque_ids
        out = serialize_bpmn(m)
        assert "intermediateThrowEvent" in out and 'foo:bar' in out

    def test_annotation_decoded(self):
        task = parse_bpmn(SIMPLE).element("T")
        (ann,) = task.annotations
        assert ann.payload.category == "email" and ann.payload.purposes == ("contact",)

    def test_tilt_ids_do_not_clash_with_bpmn_ids(self):
        # two activities disclosing the same category share the record id
        body = """<bpmn:process id="P">
          <bpmn:task id="A"><bpmn:extensionElements>
            <tilt:dataDisclosed id="x" category="x"/></bpmn:extensionElements></bpmn:task>
          <bpmn:task id="B"><bpmn:extensionElements>
            <tilt:dataDisclosed id="x" category="x"/></bpmn:extensionElements></bpmn:task>
        </bpmn:process>"""
        assert len(parse_bpmn(doc(body)).elements) == 2

    @pytest.mark.parametrize("text, error", [
        ("<not-closed>", MalformedXml),
        (doc('<bpmn:process id="P"><bpmn:task id="A"/><bpmn:task id="A"/></bpmn:process>'),
         SchemaViolation),
        (doc('<bpmn:process id="P"><bpmn:task id="A"/>'
             '<bpmn:sequenceFlow id="F" sourceRef="A" targetRef="Z"/></bpmn:process>'),
         SchemaViolation),
        (doc('<bpmn:process id="P"><bpmn:task id="A"><bpmn:extensionElements>'
             '<tilt:favouriteColour value="red"/></bpmn:extensionElements></bpmn:task>'
             '</bpmn:process>'), UnknownTiltField),
        ('<?xml version="1.0"?><root/>', SchemaViolation),
    ])
    def test_errors(self, text, error):
        with pytest.raises(error):
            parse_bpmn(text)

    def test_unknown_field_is_schema_violation(self):
        assert issubclass(UnknownTiltField, SchemaViolation)


class TestRoundTrip:
    def test_simple_is_stable(self):
        once = serialize_bpmn(parse_bpmn(SIMPLE))
        assert serialize_bpmn(parse_bpmn(once)) == once

    def test_fixture_file_round_trips_bytewise(self, fixture_dir):
        text = (fixture_dir / "shopping-checkout.bpmn").read_text(encoding="utf-8")
        assert serialize_bpmn(parse_bpmn(text)) == text

    def test_fixture_model_equals_parsed_file(self, checkout, fixture_dir):
        assert read_bpmn(fixture_dir / "shopping-checkout.bpmn") == checkout

    def test_write_and_read(self, checkout, tmp_path):
        path = tmp_path / "m.bpmn"
        write_bpmn(checkout, path)
        assert read_bpmn(path) == checkout

    def test_every_element_class_round_trips(self, checkout):
        present = {e.element_class for e in checkout.elements}
        assert present == set(ElementClass) - {ElementClass.MESSAGE_FLOW}
        assert checkout.flows_of(FlowKind.MESSAGE_FLOW)
        again = parse_bpmn(serialize_bpmn(checkout))
        for cls in ElementClass:
            if cls is ElementClass.MESSAGE_FLOW:
                continue
            assert [e.id for e in again.elements_of(cls)] == [e.id for e in checkout.elements_of(cls)]

    def test_normalize_is_idempotent(self, checkout):
        assert normalize(checkout) == checkout

    @settings(max_examples=60, deadline=None)
    @given(linear_processes())
    def test_random_models_round_trip(self, model):
        text = serialize_bpmn(model)
        again = parse_bpmn(text)
        assert again == model
        assert serialize_bpmn(again) == text


class TestModelInvariants:
    def test_country_only_on_participants(self):
        with pytest.raises(SchemaViolation):
            BpmnElement("T", ElementClass.ACTIVITY, country="DE")

    def test_country_code_format(self):
        with pytest.raises(SchemaViolation):
            BpmnElement("P", ElementClass.PARTICIPANT, country="Germany")

    def test_tag_must_match_class(self):
        with pytest.raises(SchemaViolation):
            BpmnElement("T", ElementClass.ACTIVITY, tag="exclusiveGateway")

    def test_participant_of(self, checkout):
        assert checkout.participant_of("Activity_CollectUserData").id == "Participant_Shop"
        assert checkout.element("Participant_PaymentProvider").country == "US"

    def test_census(self, checkout):
        assert fx.census(checkout) == {
            "participants": 2, "activities": 5, "sequenceFlows": 8, "messageFlows": 2,
            "exclusiveGateways": 1, "lanes": 2, "dataStores": 1, "dataObjects": 1,
        }
