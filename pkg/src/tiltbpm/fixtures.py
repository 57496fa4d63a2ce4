"""The shopping-checkout example model and the corpora generated from it.

``python -m tiltbpm.fixtures [DIR]`` regenerates every file; the output is
byte-stable, so committed fixtures can be compared against a fresh build.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from lxml import etree

from .bpmn import canonical, normalize, serialize_bpmn
from .conformance import check, extract_normative
from .eventlog import ingest
from .layout import with_layout
from .model import (
    BPMN_NS,
    BpmnElement,
    BpmnModel,
    CollaborationInfo,
    ElementClass,
    Flow,
    FlowKind,
    LaneSet,
    ProcessInfo,
)
from .simulate import DeviationKind, DeviationSpec, SimulationConfig, simulate
from .tilt import (
    AccessAndDataPortability,
    AutomatedDecisionMaking,
    ChangesOfPurpose,
    Controller,
    DataDisclosed,
    DataProtectionOfficer,
    Meta,
    Representative,
    Right,
    Source,
    ThirdCountryTransfer,
    TiltAnnotation,
    TiltFieldKind,
)

DEFAULT_DIR = Path(__file__).resolve().parents[2] / "fixtures"
FIXTURE_SEED = 42
FIXTURE_TRACES = 100
STAMP = "2024-01-01T00:00:00Z"

COLLECT = "Collect user data"
VALIDATE = "Validate cart"
PAY = "Process payment"
UPDATE = "Update billing address"
CONFIRM = "Send confirmation"

CONTROLLER = Controller("Chocolate Factory", "Compliance", "DE", Representative("Charlie"))
DPO = DataProtectionOfficer("Willy Wonka")
CONTACT = "privacy@chocolate-factory.example"

BRANCHES = {"Gateway_PaymentAccepted": {"Flow_Accepted": 0.8, "Flow_Rejected": 0.2}}


def _ann(kind: TiltFieldKind, payload: Any) -> TiltAnnotation:
    return TiltAnnotation(kind, payload)


def _disclosed(category: str, purposes, bases, recipients=(), storage=()) -> TiltAnnotation:
    return _ann(TiltFieldKind.DATA_DISCLOSED,
                DataDisclosed(category, category, tuple(purposes), tuple(bases),
                              tuple(recipients), tuple(storage)))


def _rights() -> list[TiltAnnotation]:
    return [
        _ann(TiltFieldKind.RIGHT_TO_INFORMATION, Right("Request information on stored data", CONTACT)),
        _ann(TiltFieldKind.RIGHT_TO_RECTIFICATION_OR_DELETION,
             Right("Request rectification or deletion", CONTACT)),
        _ann(TiltFieldKind.RIGHT_TO_DATA_PORTABILITY, Right("Receive data in a portable format", CONTACT)),
        _ann(TiltFieldKind.RIGHT_TO_WITHDRAW_CONSENT, Right("Withdraw consent at any time", CONTACT)),
        _ann(TiltFieldKind.RIGHT_TO_COMPLAIN, Right("Lodge a complaint with a supervisory authority",
                                                    "https://www.bfdi.bund.de")),
    ]


def _end_of_process() -> tuple[TiltAnnotation, ...]:
    return (
        _ann(TiltFieldKind.ACCESS_AND_DATA_PORTABILITY,
             AccessAndDataPortability(True, "Export available in the customer account")),
        *_rights(),
        _ann(TiltFieldKind.CHANGES_OF_PURPOSE,
             ChangesOfPurpose("No processing beyond order fulfilment is planned")),
    )


# Host element and reason for every annotation placed in the fixture model.
PLACEMENTS: list[dict[str, str]] = [
    {"element": "StartEvent_Checkout", "field": "meta",
     "reason": "policy identity lives on the process entry point"},
    {"element": "Participant_Shop", "field": "controller",
     "reason": "collaboration diagrams name the controller on the pool"},
    {"element": "Participant_Shop", "field": "dataProtectionOfficer",
     "reason": "the DPO belongs to the controlling organization"},
    {"element": "Participant_Shop", "field": "sources",
     "reason": "pool-level statement of where customer data originates"},
    {"element": "DataStore_CustomerDb", "field": "sources",
     "reason": "the customer database is the concrete data source"},
    {"element": "Activity_CollectUserData", "field": "dataDisclosed",
     "reason": "address data entered during checkout"},
    {"element": "Activity_ValidateCart", "field": "dataDisclosed",
     "reason": "purchase history consulted for validation"},
    {"element": "Activity_ProcessPayment", "field": "dataDisclosed",
     "reason": "payment details shared with the payment provider"},
    {"element": "Activity_UpdateBillingAddress", "field": "dataDisclosed",
     "reason": "corrected address after a rejected payment"},
    {"element": "DataObject_OrderConfirmation", "field": "dataDisclosed",
     "reason": "confirmation e-mail; propagated to the associated activity"},
    {"element": "MessageFlow_PaymentRequest", "field": "thirdCountryTransfers",
     "reason": "payment request leaves the EEA for the US provider"},
    {"element": "Gateway_PaymentAccepted", "field": "automatedDecisionMaking",
     "reason": "payment acceptance is decided automatically"},
    {"element": "EndEvent_Checkout", "field": "accessAndDataPortability",
     "reason": "post-processing information is given at the end of the process"},
    {"element": "EndEvent_Checkout", "field": "rightTo{inf, del, por, con, com}",
     "reason": "all five data subject rights are stated at the end of the process"},
    {"element": "EndEvent_Checkout", "field": "changesOfPurpose",
     "reason": "end-of-process statement about further use"},
]


def build_shopping_checkout() -> BpmnModel:
    pid = "Process_Shop"
    shop, front, back = "Participant_Shop", "Lane_Frontend", "Lane_Backend"

    def node(eid, cls, name, lane, *anns, tag=""):
        return BpmnElement(eid, cls, name=name, tag=tag, container=lane, process_id=pid,
                           annotations=anns)

    billing = ("billing",)
    contract = ("GDPR-6-1-b",)
    elements = (
        BpmnElement(shop, ElementClass.PARTICIPANT, name="Shop", country="DE",
                    attributes={"processRef": pid},
                    annotations=(_ann(TiltFieldKind.CONTROLLER, CONTROLLER),
                                 _ann(TiltFieldKind.DATA_PROTECTION_OFFICER, DPO),
                                 _ann(TiltFieldKind.SOURCES, Source("Data provided by the customer")))),
        BpmnElement("Participant_PaymentProvider", ElementClass.PARTICIPANT,
                    name="Payment Provider", country="US"),
        BpmnElement(front, ElementClass.LANE, name="Frontend", container=shop, process_id=pid),
        BpmnElement(back, ElementClass.LANE, name="Backend", container=shop, process_id=pid),
        node("StartEvent_Checkout", ElementClass.START_EVENT, "Checkout started", front,
             _ann(TiltFieldKind.META, Meta("Shopping checkout", STAMP, STAMP, 1))),
        node("Activity_CollectUserData", ElementClass.ACTIVITY, COLLECT, front,
             _disclosed("postcode", ["rightToAccess"], ["GDPR-15-1"]),
             _disclosed("street", ["rightToAccess"], ["GDPR-15-1"]), tag="userTask"),
        node("Activity_ValidateCart", ElementClass.ACTIVITY, VALIDATE, front,
             _disclosed("purchaseHistory", ["orderValidation"], contract), tag="serviceTask"),
        node("Activity_ProcessPayment", ElementClass.ACTIVITY, PAY, back,
             _disclosed("paymentDetails", ["payment"], contract, ["Payment Provider"], ["P10Y"]),
             tag="serviceTask"),
        node("Gateway_PaymentAccepted", ElementClass.GATEWAY, "Payment accepted?", back,
             _ann(TiltFieldKind.AUTOMATED_DECISION_MAKING,
                  AutomatedDecisionMaking(True, "Fraud score threshold on payment data")),
             tag="exclusiveGateway"),
        node("Activity_UpdateBillingAddress", ElementClass.ACTIVITY, UPDATE, back,
             _disclosed("street", billing, contract), _disclosed("postcode", billing, contract),
             tag="userTask"),
        node("Activity_SendConfirmation", ElementClass.ACTIVITY, CONFIRM, back, tag="sendTask"),
        node("EndEvent_Checkout", ElementClass.END_EVENT, "Checkout completed", back,
             *_end_of_process()),
        BpmnElement("DataStore_CustomerDb", ElementClass.DATA_STORE_REFERENCE, name="Customer DB",
                    container=shop, process_id=pid,
                    annotations=(_ann(TiltFieldKind.SOURCES, Source("Customer account registration")),)),
        BpmnElement("DataObject_OrderConfirmation", ElementClass.DATA_OBJECT_REFERENCE,
                    name="Order confirmation", container=shop, process_id=pid,
                    attributes={"dataObjectRef": "DataObject_OrderConfirmationData"},
                    annotations=(_disclosed("email", ["orderConfirmation"], contract),)),
    )

    def seq(fid, src, tgt, name=""):
        return Flow(fid, FlowKind.SEQUENCE_FLOW, src, tgt, name=name, process_id=pid)

    flows = (
        seq("Flow_Start", "StartEvent_Checkout", "Activity_CollectUserData"),
        seq("Flow_Collected", "Activity_CollectUserData", "Activity_ValidateCart"),
        seq("Flow_Validated", "Activity_ValidateCart", "Activity_ProcessPayment"),
        seq("Flow_Paid", "Activity_ProcessPayment", "Gateway_PaymentAccepted"),
        seq("Flow_Accepted", "Gateway_PaymentAccepted", "Activity_SendConfirmation", "yes"),
        seq("Flow_Rejected", "Gateway_PaymentAccepted", "Activity_UpdateBillingAddress", "no"),
        seq("Flow_Retry", "Activity_UpdateBillingAddress", "Activity_ProcessPayment"),
        seq("Flow_Done", "Activity_SendConfirmation", "EndEvent_Checkout"),
        Flow("MessageFlow_PaymentRequest", FlowKind.MESSAGE_FLOW, "Activity_ProcessPayment",
             "Participant_PaymentProvider", name="Payment request",
             annotations=(_ann(TiltFieldKind.THIRD_COUNTRY_TRANSFERS,
                               ThirdCountryTransfer("US", True, "EU-US Data Privacy Framework")),)),
        Flow("MessageFlow_PaymentResult", FlowKind.MESSAGE_FLOW, "Participant_PaymentProvider",
             "Activity_ProcessPayment", name="Payment result"),
        Flow("DataOutputAssociation_CustomerDb", FlowKind.DATA_ASSOCIATION,
             "Activity_CollectUserData", "DataStore_CustomerDb",
             tag="dataOutputAssociation", process_id=pid),
        Flow("DataOutputAssociation_Confirmation", FlowKind.DATA_ASSOCIATION,
             "Activity_SendConfirmation", "DataObject_OrderConfirmation",
             tag="dataOutputAssociation", process_id=pid),
    )
    data_object = etree.Element(f"{{{BPMN_NS}}}dataObject", id="DataObject_OrderConfirmationData")
    model = BpmnModel(
        elements=elements,
        flows=flows,
        processes=(ProcessInfo(pid, name="Shop checkout", attributes={"isExecutable": "false"},
                               lane_sets=(LaneSet("LaneSet_Shop", (front, back)),),
                               preserved=(canonical(data_object),)),),
        collaboration=CollaborationInfo("Collaboration_ShoppingCheckout", name="Shopping checkout"),
    )
    return normalize(with_layout(model))


def build_cross_border() -> BpmnModel:
    """DE to US collaboration, fully annotated except for the transfer on its message flow."""
    pid = "Process_Orders"
    elements = (
        BpmnElement("Participant_Shop", ElementClass.PARTICIPANT, name="Shop", country="DE",
                    attributes={"processRef": pid},
                    annotations=(_ann(TiltFieldKind.CONTROLLER, CONTROLLER),
                                 _ann(TiltFieldKind.DATA_PROTECTION_OFFICER, DPO),
                                 _ann(TiltFieldKind.SOURCES, Source("Data provided by the customer")))),
        BpmnElement("Participant_Fulfilment", ElementClass.PARTICIPANT,
                    name="Fulfilment Partner", country="US"),
        BpmnElement("StartEvent_Order", ElementClass.START_EVENT, name="Order received",
                    container="Participant_Shop", process_id=pid,
                    annotations=(_ann(TiltFieldKind.META, Meta("Order fulfilment", STAMP, STAMP, 1)),)),
        BpmnElement("Activity_ShipOrder", ElementClass.ACTIVITY, name="Ship order",
                    tag="sendTask", container="Participant_Shop", process_id=pid,
                    annotations=(_disclosed("postcode", ["delivery"], ["GDPR-6-1-b"]),
                                 _ann(TiltFieldKind.AUTOMATED_DECISION_MAKING,
                                      AutomatedDecisionMaking(False)))),
        BpmnElement("EndEvent_Order", ElementClass.END_EVENT, name="Order shipped",
                    container="Participant_Shop", process_id=pid, annotations=_end_of_process()),
    )
    flows = (
        Flow("Flow_1", FlowKind.SEQUENCE_FLOW, "StartEvent_Order", "Activity_ShipOrder", process_id=pid),
        Flow("Flow_2", FlowKind.SEQUENCE_FLOW, "Activity_ShipOrder", "EndEvent_Order", process_id=pid),
        Flow("MessageFlow_Shipment", FlowKind.MESSAGE_FLOW, "Activity_ShipOrder",
             "Participant_Fulfilment", name="Shipment data"),
    )
    model = BpmnModel(
        elements=elements, flows=flows,
        processes=(ProcessInfo(pid, name="Order fulfilment", attributes={"isExecutable": "false"}),),
        collaboration=CollaborationInfo("Collaboration_CrossBorder", name="Cross-border shipping"),
    )
    return normalize(with_layout(model))


CONTROLLER_SNIPPET = """<?xml version="1.0" encoding="UTF-8"?>
<bpmn:definitions xmlns:bpmn="http://www.omg.org/spec/BPMN/20100524/MODEL" xmlns:tilt="http://tilt-bpmn.org/schema/v1" id="Definitions_ControllerSnippet" targetNamespace="http://bpmn.io/schema/bpmn">
  <bpmn:process id="Process_ControllerSnippet" isExecutable="false">
    <bpmn:startEvent
        id="StartEvent">
      <bpmn:extensionElements>
        <tilt:controller
          name="Chocolate Factory"
          division="Compliance"
          country="DE">
          <tilt:representative
            name="Charlie" />
        </tilt:controller>
        <tilt:dataProtectionOfficer
          name="Willy Wonka"/>
      </bpmn:extensionElements>
    </bpmn:startEvent>
  </bpmn:process>
</bpmn:definitions>
"""


def simulation_config(deviations=(), seed: int = FIXTURE_SEED,
                      traces: int = FIXTURE_TRACES) -> SimulationConfig:
    return SimulationConfig(trace_count=traces, seed=seed, branch_probabilities=BRANCHES,
                            deviations=tuple(deviations))


DROP_STREET = DeviationSpec(DeviationKind.DROP_CATEGORY, COLLECT, "street", 1.0)
ADD_EMAIL = DeviationSpec(DeviationKind.ADD_CATEGORY, COLLECT, "email", 1.0)

LOGS = {
    "clean": (),
    "drop-street": (DROP_STREET,),
    "add-email": (ADD_EMAIL,),
}


@dataclass(frozen=True)
class Fixture:
    name: str
    model_file: str
    clean_log: str
    deviation_logs: dict[str, str]
    expected_reports: dict[str, str]


def census(model: BpmnModel) -> dict[str, int]:
    return {
        "participants": len(model.elements_of(ElementClass.PARTICIPANT)),
        "activities": len(model.elements_of(ElementClass.ACTIVITY)),
        "sequenceFlows": len(model.flows_of(FlowKind.SEQUENCE_FLOW)),
        "messageFlows": len(model.flows_of(FlowKind.MESSAGE_FLOW)),
        "exclusiveGateways": sum(1 for g in model.elements_of(ElementClass.GATEWAY)
                                 if g.tag == "exclusiveGateway"),
        "lanes": len(model.elements_of(ElementClass.LANE)),
        "dataStores": len(model.elements_of(ElementClass.DATA_STORE_REFERENCE)),
        "dataObjects": len(model.elements_of(ElementClass.DATA_OBJECT_REFERENCE)),
    }


def render_fixtures() -> dict[str, str]:
    """File name to content for every fixture file."""
    model = build_shopping_checkout()
    files: dict[str, str] = {
        "shopping-checkout.bpmn": serialize_bpmn(model),
        "cross-border.bpmn": serialize_bpmn(build_cross_border()),
        "controller-snippet.bpmn": CONTROLLER_SNIPPET,
    }
    normative = extract_normative(model)
    for name, deviations in LOGS.items():
        config = simulation_config(deviations)
        lines = list(simulate(model, config))
        files[f"{name}.jsonl"] = "\n".join(lines) + "\n"
        files[f"{name}.sim.json"] = json.dumps(config.to_dict(), indent=2) + "\n"
        report = check(normative, ingest(lines, strict=True).log)
        files[f"{name}.report.json"] = report.to_json()
    manifest = {
        "name": "shopping-checkout",
        "model": "shopping-checkout.bpmn",
        "census": census(model),
        "cleanLog": "clean.jsonl",
        "deviationLogs": {k: f"{k}.jsonl" for k in LOGS if k != "clean"},
        "simulationConfigs": {k: f"{k}.sim.json" for k in LOGS},
        "expectedReports": {k: f"{k}.report.json" for k in LOGS},
        "seed": FIXTURE_SEED,
        "traces": FIXTURE_TRACES,
        "placements": PLACEMENTS,
        "extras": {"crossBorder": "cross-border.bpmn", "controllerSnippet": "controller-snippet.bpmn"},
    }
    files["manifest.json"] = json.dumps(manifest, indent=2, ensure_ascii=False) + "\n"
    return files


def build_fixtures(out_dir: str | Path = DEFAULT_DIR) -> Fixture:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, content in render_fixtures().items():
        (out / name).write_text(content, encoding="utf-8", newline="\n")
    return Fixture(
        name="shopping-checkout",
        model_file=str(out / "shopping-checkout.bpmn"),
        clean_log=str(out / "clean.jsonl"),
        deviation_logs={k: str(out / f"{k}.jsonl") for k in LOGS if k != "clean"},
        expected_reports={k: str(out / f"{k}.report.json") for k in LOGS},
    )


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    fixture = build_fixtures(argv[0] if argv else DEFAULT_DIR)
    print(Path(fixture.model_file).parent)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
