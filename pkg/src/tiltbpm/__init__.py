"""Transparency-aware BPMN: TILT annotations, linting, discovery and conformance."""

from .bpmn import parse_bpmn, read_bpmn, serialize_bpmn, write_bpmn
from .conformance import annotate_diagram, check, extract_normative
from .errors import TiltBpmError
from .eventlog import EventLog, TransparencyEvent, flatten_disclosed, ingest
from .export import completeness, export_tilt
from .lint import LintConfig, autofix, builtin_registry, lint, register_rule
from .model import BpmnModel, DiagramKind, ElementClass
from .simulate import DeviationSpec, SimulationConfig, simulate
from .tilt import TiltAnnotation, TiltFieldKind, attach, extract

__version__ = "0.1.0"

__all__ = [
    "BpmnModel", "DeviationSpec", "DiagramKind", "ElementClass", "EventLog", "LintConfig",
    "SimulationConfig", "TiltAnnotation", "TiltBpmError", "TiltFieldKind", "TransparencyEvent",
    "annotate_diagram", "attach", "autofix", "builtin_registry", "check", "completeness",
    "export_tilt", "extract", "extract_normative", "flatten_disclosed", "ingest", "lint",
    "parse_bpmn", "read_bpmn", "register_rule", "serialize_bpmn", "simulate", "write_bpmn",
]
