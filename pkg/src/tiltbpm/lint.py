"""Transparency lint rules with severities and deterministic auto-fixes."""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from .errors import ConflictingFix, DuplicateRuleId, TiltBpmError
from .export import completeness
from .model import BpmnModel, ElementClass, FlowKind
from .tilt import (
    Meta,
    Origin,
    ThirdCountryTransfer,
    TiltAnnotation,
    TiltColumn,
    TiltFieldKind,
    allowed_columns,
    is_allowed,
    iter_annotations,
    placement_class,
)

EEA_COUNTRIES = frozenset(
    "AT BE BG HR CY CZ DK EE FI FR DE GR HU IE IT LV LT LU MT NL PL PT RO SK SI ES SE "
    "IS LI NO".split()
)

PLACEMENT = "tilt/placement"
COMPLETENESS = "tilt/completeness"
THIRD_COUNTRY_MISSING = "tilt/third-country-missing"
SANCTIONED_COUNTRY = "tilt/sanctioned-country"

ALL_CLASSES = frozenset(ElementClass)


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"

    @property
    def rank(self) -> int:
        return list(Severity).index(self)


@dataclass(frozen=True)
class FixEdit:
    """Replace the auto-filled annotations of ``field`` on ``target_id``.

    ``annotation=None`` removes them.  Manual annotations are never touched.
    """

    target_id: str
    field: TiltFieldKind
    annotation: TiltAnnotation | None


@dataclass(frozen=True)
class Violation:
    element_id: str
    message: str
    fix: FixEdit | None = None


@dataclass(frozen=True)
class Finding:
    rule_id: str
    element_id: str
    severity: Severity
    message: str
    fix: FixEdit | None = None

    @property
    def fixable(self) -> bool:
        return self.fix is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "ruleId": self.rule_id,
            "elementId": self.element_id,
            "severity": self.severity.value,
            "message": self.message,
            "fixable": self.fixable,
        }


@dataclass
class LintConfig:
    home_countries: frozenset[str] = EEA_COUNTRIES
    sanctioned_countries: frozenset[str] = frozenset()
    disabled_rules: frozenset[str] = frozenset()
    severity_overrides: Mapping[str, Severity] = field(default_factory=dict)
    # ISO-8601 instant used for auto-filled meta timestamps; None means "now".
    timestamp: str | None = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> LintConfig:
        known = {"homeCountries", "sanctionedCountries", "disabledRules",
                 "severityOverrides", "timestamp"}
        unknown = set(data) - known
        if unknown:
            raise TiltBpmError(f"unknown lint config keys: {sorted(unknown)}")
        cfg = cls()
        if "homeCountries" in data:
            cfg.home_countries = frozenset(c.upper() for c in data["homeCountries"])
        if "sanctionedCountries" in data:
            cfg.sanctioned_countries = frozenset(c.upper() for c in data["sanctionedCountries"])
        if "disabledRules" in data:
            cfg.disabled_rules = frozenset(data["disabledRules"])
        if "severityOverrides" in data:
            try:
                cfg.severity_overrides = {
                    k: Severity(v.lower()) for k, v in data["severityOverrides"].items()
                }
            except ValueError as exc:
                raise TiltBpmError(f"bad severity override: {exc}") from None
        if "timestamp" in data:
            cfg.timestamp = data["timestamp"]
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> LintConfig:
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        else:
            data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data)

    def now(self) -> str:
        if self.timestamp is not None:
            return self.timestamp
        return datetime.now(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


CheckFn = Callable[[BpmnModel, LintConfig], Iterable[Violation]]


@dataclass(frozen=True)
class LintRule:
    id: str
    severity: Severity
    check: CheckFn
    scope: frozenset[ElementClass] = ALL_CLASSES
    description: str = ""


class RuleRegistry:
    def __init__(self, rules: Iterable[LintRule] = ()):
        self._rules: dict[str, LintRule] = {}
        for rule in rules:
            self.register(rule)

    def register(self, rule: LintRule) -> RuleRegistry:
        if rule.id in self._rules:
            raise DuplicateRuleId(rule.id)
        self._rules[rule.id] = rule
        return self

    def __iter__(self):
        return iter(self._rules.values())

    def __len__(self) -> int:
        return len(self._rules)

    def __contains__(self, rule_id: str) -> bool:
        return rule_id in self._rules

    def ids(self) -> list[str]:
        return list(self._rules)


def register_rule(registry: RuleRegistry, rule: LintRule) -> RuleRegistry:
    return registry.register(rule)


# -- builtin rules ---------------------------------------------------------------

def _check_placement(model: BpmnModel, config: LintConfig) -> Iterable[Violation]:
    kind = model.diagram_kind
    for item, ann in iter_annotations(model):
        if not is_allowed(item, ann.field, kind):
            cls = placement_class(item)
            where = cls.value if cls else item.kind.value  # type: ignore[union-attr]
            yield Violation(
                item.id,
                f"{ann.field.value} is not allowed on {where} in a {kind.value} diagram",
            )


def _model_name(model: BpmnModel) -> str:
    if model.collaboration is not None and model.collaboration.name:
        return model.collaboration.name
    for proc in model.processes:
        if proc.name:
            return proc.name
    return model.definitions_attributes.get("id", "process")


def _check_completeness(model: BpmnModel, config: LintConfig) -> Iterable[Violation]:
    kind = model.diagram_kind
    for column, present in completeness(model).items():
        # transfers are only required on cross-border flows; the dedicated rule decides
        if present or column is TiltColumn.THIRD_COUNTRY_TRANSFERS:
            continue
        host = None
        for item in model.iter_items():
            cls = placement_class(item)
            if cls is not None and column in allowed_columns(cls, kind):
                host = item
                break
        if host is None:
            continue
        fix = None
        if column is TiltColumn.META:
            stamp = config.now()
            meta = Meta(name=_model_name(model), created=stamp, modified=stamp, version=1)
            fix = FixEdit(host.id, TiltFieldKind.META,
                          TiltAnnotation(TiltFieldKind.META, meta, Origin.AUTO_FILLED))
        yield Violation(host.id, f"no {column.value} information in the model", fix)


def _countries(model: BpmnModel, flow) -> tuple[str | None, str | None]:
    src = model.participant_of(flow.source_id)
    tgt = model.participant_of(flow.target_id)
    return (src.country if src else None), (tgt.country if tgt else None)


def _check_third_country(model: BpmnModel, config: LintConfig) -> Iterable[Violation]:
    for flow in model.flows_of(FlowKind.MESSAGE_FLOW):
        src, tgt = _countries(model, flow)
        transfers = [a for a in flow.annotations if a.field is TiltFieldKind.THIRD_COUNTRY_TRANSFERS]
        manual = [a.payload.country for a in transfers if a.origin is Origin.MANUAL]
        auto = [a.payload for a in transfers if a.origin is Origin.AUTO_FILLED]
        if src is None or tgt is None:
            continue
        cross_border = src in config.home_countries and tgt not in config.home_countries
        expected = []
        if cross_border and tgt not in manual:
            expected = [ThirdCountryTransfer(country=tgt)]
        if auto == expected:
            continue
        if expected:
            annotation = TiltAnnotation(TiltFieldKind.THIRD_COUNTRY_TRANSFERS, expected[0],
                                        Origin.AUTO_FILLED)
            stale = f" (stale auto-filled {', '.join(p.country for p in auto)})" if auto else ""
            message = f"message flow {src}->{tgt} leaves the home jurisdiction without a " \
                      f"thirdCountryTransfers annotation for {tgt}{stale}"
        else:
            annotation = None
            message = "auto-filled thirdCountryTransfers no longer matches the participants' countries"
        yield Violation(flow.id, message,
                        FixEdit(flow.id, TiltFieldKind.THIRD_COUNTRY_TRANSFERS, annotation))


def _check_sanctioned(model: BpmnModel, config: LintConfig) -> Iterable[Violation]:
    for flow in model.flows_of(FlowKind.MESSAGE_FLOW):
        _, tgt = _countries(model, flow)
        if tgt is not None and tgt in config.sanctioned_countries:
            yield Violation(flow.id, f"message flow into sanctioned country {tgt}")


BUILTIN_RULES = (
    LintRule(PLACEMENT, Severity.ERROR, _check_placement,
             description="TILT field placed on an element class the mapping forbids"),
    LintRule(COMPLETENESS, Severity.WARNING, _check_completeness,
             description="applicable TILT field missing from the whole model"),
    LintRule(THIRD_COUNTRY_MISSING, Severity.ERROR, _check_third_country,
             frozenset({ElementClass.MESSAGE_FLOW}),
             description="cross-border message flow lacks a third-country transfer annotation"),
    LintRule(SANCTIONED_COUNTRY, Severity.ERROR, _check_sanctioned,
             frozenset({ElementClass.MESSAGE_FLOW}),
             description="message flow into a sanctioned country"),
)


def builtin_registry() -> RuleRegistry:
    return RuleRegistry(BUILTIN_RULES)


# -- engine ------------------------------------------------------------------------

def lint(
    model: BpmnModel,
    registry: RuleRegistry | None = None,
    config: LintConfig | None = None,
) -> list[Finding]:
    """Run every enabled rule; findings sorted by severity, document order, rule id."""
    registry = registry if registry is not None else builtin_registry()
    config = config or LintConfig()
    order = model.document_order()
    findings: list[Finding] = []
    for rule in registry:
        if rule.id in config.disabled_rules:
            continue
        severity = config.severity_overrides.get(rule.id, rule.severity)
        for v in rule.check(model, config):
            if rule.scope != ALL_CLASSES and placement_class(model.get(v.element_id)) not in rule.scope:
                continue
            findings.append(Finding(rule.id, v.element_id, severity, v.message, v.fix))
    findings.sort(key=lambda f: (f.severity.rank, order.get(f.element_id, len(order)),
                                 f.rule_id, f.message))
    return findings


def autofix(model: BpmnModel, findings: Iterable[Finding]) -> BpmnModel:
    """Apply the fix of every fixable finding, in finding order."""
    planned: dict[tuple[str, TiltFieldKind], TiltAnnotation | None] = {}
    for finding in findings:
        if finding.fix is None:
            continue
        edit = finding.fix
        slot = (edit.target_id, edit.field)
        if slot in planned and planned[slot] != edit.annotation:
            raise ConflictingFix(
                f"conflicting fixes for {edit.field.value} on {edit.target_id!r}"
            )
        planned[slot] = edit.annotation

    for (target_id, kind), annotation in planned.items():
        item = model.get(target_id)
        kept: list[TiltAnnotation] = []
        insert_at = None
        for ann in item.annotations:
            if ann.field is kind and ann.origin is Origin.AUTO_FILLED:
                if insert_at is None:
                    insert_at = len(kept)
                continue
            kept.append(ann)
        if annotation is not None:
            kept.insert(len(kept) if insert_at is None else insert_at, annotation)
        model = model.replace_item(dataclasses.replace(item, annotations=tuple(kept)))
    return model
