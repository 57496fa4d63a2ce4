from __future__ import annotations

import json
import subprocess
import sys

import pytest

from tiltbpm import fixtures as fx
from tiltbpm.bpmn import read_bpmn
from tiltbpm.cli import main
from tiltbpm.conformance import BLUE_FILL, ORANGE_FILL, colored_shapes
from tiltbpm.tilt import Origin, TiltFieldKind


@pytest.fixture
def run(capsys):
    def _run(*argv):
        code = main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err
    return _run


class TestLint:
    def test_cross_border_exits_one(self, run, fixture_dir):
        code, out, err = run("lint", "--model", fixture_dir / "cross-border.bpmn")
        assert code == 1
        (line,) = out.splitlines()
        assert line.startswith("ERROR") and "tilt/third-country-missing" in line
        assert err == ""

    def test_clean_fixture(self, run, fixture_dir):
        assert run("lint", "--model", fixture_dir / "shopping-checkout.bpmn") == (0, "", "")

    def test_json_format(self, run, fixture_dir):
        code, out, _ = run("lint", "--model", fixture_dir / "cross-border.bpmn", "--format", "json")
        (finding,) = json.loads(out)
        assert finding["fixable"] and finding["severity"] == "error" and code == 1

    def test_config_from_env(self, run, fixture_dir, tmp_path, monkeypatch):
        cfg = tmp_path / "lint.json"
        cfg.write_text(json.dumps({"homeCountries": ["DE", "US"]}))
        monkeypatch.setenv("TILTBPM_CONFIG", str(cfg))
        assert run("lint", "--model", fixture_dir / "cross-border.bpmn")[0] == 0

    def test_config_flag_beats_env(self, run, fixture_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("TILTBPM_CONFIG", str(tmp_path / "missing.json"))
        cfg = tmp_path / "lint.toml"
        cfg.write_text('sanctionedCountries = ["US"]\n')
        code, out, _ = run("lint", "--model", fixture_dir / "cross-border.bpmn", "--config", cfg)
        assert code == 1 and "tilt/sanctioned-country" in out


class TestFix:
    def test_fix_writes_model(self, run, fixture_dir, tmp_path):
        out_path = tmp_path / "fixed.bpmn"
        code, _, err = run("fix", "--model", fixture_dir / "cross-border.bpmn", "--out", out_path)
        assert code == 0 and "applied 1 fix" in err
        flow = read_bpmn(out_path).get("MessageFlow_Shipment")
        (ann,) = flow.annotations
        assert ann.payload.country == "US" and ann.origin is Origin.AUTO_FILLED
        assert run("lint", "--model", out_path)[0] == 0

    def test_source_date_epoch(self, run, fixture_dir, tmp_path, monkeypatch):
        from tiltbpm.bpmn import write_bpmn
        import dataclasses

        model = fx.build_cross_border()
        start = model.element("StartEvent_Order")
        bare = model.replace_item(dataclasses.replace(start, annotations=()))
        src = tmp_path / "bare.bpmn"
        write_bpmn(bare, src)
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        code, out, _ = run("fix", "--model", src)
        assert code == 0 and 'created="1970-01-01T00:00:00Z"' in out


class TestExport:
    def test_controller(self, run, fixture_dir):
        code, out, _ = run("export-tilt", "--model", fixture_dir / "shopping-checkout.bpmn")
        assert code == 0
        assert json.loads(out)["controller"][0]["name"] == "Chocolate Factory"

    def test_missing_meta_is_error(self, run, fixture_dir):
        code, out, err = run("export-tilt", "--model", fixture_dir / "controller-snippet.bpmn")
        assert code == 2 and out == "" and err.startswith("tiltbpm: error:")


class TestSimulate:
    def test_matches_fixture_log(self, run, fixture_dir):
        code, out, _ = run("simulate", "--model", fixture_dir / "shopping-checkout.bpmn",
                           "--config", fixture_dir / "add-email.sim.json")
        assert code == 0
        assert out == (fixture_dir / "add-email.jsonl").read_text(encoding="utf-8")

    def test_seed_and_traces_override(self, run, fixture_dir):
        code, out, _ = run("simulate", "--model", fixture_dir / "shopping-checkout.bpmn",
                           "--config", fixture_dir / "clean.sim.json", "--seed", 1, "--traces", 3)
        assert code == 0 and out.splitlines()[0].endswith("seed=1 generator=python-random-mt19937 traces=3")


class TestDiscover:
    def test_bpmn_and_dot(self, run, fixture_dir, tmp_path):
        dot = tmp_path / "dfg.dot"
        code, out, _ = run("discover", "--log", fixture_dir / "clean.jsonl", "--dot", dot)
        assert code == 0 and "<bpmn:definitions" in out
        assert dot.read_text().startswith("digraph dfg")

    def test_dot_format(self, run, fixture_dir):
        code, out, _ = run("discover", "--log", fixture_dir / "clean.jsonl", "--format", "dot")
        assert code == 0 and out.startswith("digraph dfg")

    def test_deterministic(self, run, fixture_dir):
        first = run("discover", "--log", fixture_dir / "clean.jsonl")
        assert run("discover", "--log", fixture_dir / "clean.jsonl") == first


class TestCheck:
    def test_clean_log(self, run, fixture_dir):
        code, out, _ = run("check", "--model", fixture_dir / "shopping-checkout.bpmn",
                           "--log", fixture_dir / "clean.jsonl")
        assert code == 0
        assert json.loads(out)["summary"]["missing"] == 0
        assert out == (fixture_dir / "clean.report.json").read_text(encoding="utf-8")

    @pytest.mark.parametrize("name, fill", [("drop-street", BLUE_FILL), ("add-email", ORANGE_FILL)])
    def test_out_directory(self, run, fixture_dir, tmp_path, name, fill):
        code, out, err = run("check", "--model", fixture_dir / "shopping-checkout.bpmn",
                             "--log", fixture_dir / f"{name}.jsonl", "--out", tmp_path)
        assert code == 1 and out == ""
        assert (tmp_path / "report.json").read_text() == \
            (fixture_dir / f"{name}.report.json").read_text()
        assert colored_shapes(read_bpmn(tmp_path / "normative.bpmn")) == {
            "Activity_CollectUserData": fill}
        discovered = read_bpmn(tmp_path / "discovered.bpmn")
        collect = next(e for e in discovered.elements if e.name == fx.COLLECT)
        assert colored_shapes(discovered) == {collect.id: fill}
        assert any(a.field is TiltFieldKind.DATA_DISCLOSED for a in collect.annotations)

    def test_text_format(self, run, fixture_dir):
        code, out, _ = run("check", "--model", fixture_dir / "shopping-checkout.bpmn",
                           "--log", fixture_dir / "add-email.jsonl", "--format", "text")
        assert code == 1 and "Undeclared" in out and "orange" in out


class TestReport:
    @pytest.mark.parametrize("fmt", ["text", "json"])
    def test_render(self, run, fixture_dir, fmt):
        path = fixture_dir / "drop-street.report.json"
        code, out, _ = run("report", "--report", path, "--format", fmt)
        assert code == 0
        if fmt == "json":
            assert out == path.read_text(encoding="utf-8")
        else:
            assert "Missing" in out and "blue" in out


class TestErrors:
    def test_missing_file(self, run, tmp_path):
        code, out, err = run("lint", "--model", tmp_path / "nope.bpmn")
        assert code == 2 and out == "" and "error" in err

    def test_malformed_model(self, run, tmp_path):
        bad = tmp_path / "bad.bpmn"
        bad.write_text("<definitions")
        assert run("lint", "--model", bad)[0] == 2

    def test_usage_error(self, run):
        assert run("lint")[0] == 2
        assert run("frobnicate")[0] == 2

    def test_help(self, run):
        code, out, _ = run("--help")
        assert code == 0 and "check" in out


def test_module_entry_point(fixture_dir):
    proc = subprocess.run([sys.executable, "-m", "tiltbpm", "lint", "--model",
                           str(fixture_dir / "cross-border.bpmn")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 1 and proc.stdout.count("\n") == 1
