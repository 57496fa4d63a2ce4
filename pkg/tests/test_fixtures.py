from __future__ import annotations

import json

from tiltbpm import fixtures as fx
from tiltbpm.bpmn import parse_bpmn, read_bpmn
from tiltbpm.lint import lint
from tiltbpm.tilt import Controller, TiltColumn, Representative, TiltFieldKind, extract


def test_committed_files_match_regeneration(fixture_dir):
    rendered = fx.render_fixtures()
    on_disk = {p.name for p in fixture_dir.iterdir() if p.is_file()}
    assert on_disk == set(rendered)
    for name, content in rendered.items():
        assert (fixture_dir / name).read_text(encoding="utf-8") == content, name


def test_build_into_directory(tmp_path, fixture_dir):
    built = fx.build_fixtures(tmp_path)
    assert read_bpmn(built.model_file) == read_bpmn(fixture_dir / "shopping-checkout.bpmn")
    assert set(built.deviation_logs) == {"drop-street", "add-email"}
    for path in built.expected_reports.values():
        assert (tmp_path / path.split("/")[-1]).exists()


def test_generation_is_deterministic():
    assert fx.render_fixtures() == fx.render_fixtures()


def test_manifest(fixture_dir):
    manifest = json.loads((fixture_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["census"] == fx.census(fx.build_shopping_checkout())
    model = fx.build_shopping_checkout()
    for placement in manifest["placements"]:
        kinds = TiltColumn(placement["field"]).kinds
        hosts = [i for k in kinds for i, _ in extract(model, k)]
        assert placement["element"] in hosts, placement


def test_controller_matches_snippet(checkout):
    ((_, ann),) = extract(checkout, TiltFieldKind.CONTROLLER)
    assert ann.payload == Controller("Chocolate Factory", "Compliance", "DE",
                                     Representative("Charlie"))
    ((_, dpo),) = extract(checkout, TiltFieldKind.DATA_PROTECTION_OFFICER)
    assert dpo.payload.name == "Willy Wonka"


def test_transfer_on_one_message_flow(checkout):
    hosts = [i for i, _ in extract(checkout, TiltFieldKind.THIRD_COUNTRY_TRANSFERS)]
    assert hosts == ["MessageFlow_PaymentRequest"]


def test_controller_snippet_file(fixture_dir):
    assert (fixture_dir / "controller-snippet.bpmn").read_text(encoding="utf-8") == fx.CONTROLLER_SNIPPET
    assert parse_bpmn(fx.CONTROLLER_SNIPPET).elements[0].id == "StartEvent"


def test_lint_states(checkout, cross_border):
    assert lint(checkout) == []
    assert len(lint(cross_border)) == 1


def test_main(tmp_path, capsys):
    assert fx.main([str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == str(tmp_path)
    assert (tmp_path / "manifest.json").exists()
