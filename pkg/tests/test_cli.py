import json
from pathlib import Path

import jsonschema
import pytest

from conleykit import cli, conley
from conleykit.cubical import CubeSet, Grid, transition_graph
from conleykit.errors import DimUnsupported
from conleykit.flow import FlowConfig, VectorFieldSpec

GOLDEN = Path(__file__).parent / "golden"


def run(tmp_path, *args):
    out = tmp_path / "report.json"
    svg = tmp_path / "picture.svg"
    code = cli.main(["run", *args, "--out", str(out), "--svg", str(svg)])
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report, svg


def stage(report, sid):
    return next(s for s in report["stages"] if s["id"] == sid)


@pytest.fixture(scope="module")
def saddle_run(tmp_path_factory):
    return run(tmp_path_factory.mktemp("saddle"), "saddle2")


class TestRun:
    def test_saddle_passes(self, saddle_run):
        code, report, _ = saddle_run
        assert code == 0 and report["passed"]
        assert stage(report, "index")["homology"]["forward"] == {"1": [1, []]}
        assert all(s["status"] == "pass" for s in report["stages"])

    def test_report_matches_schema(self, saddle_run):
        _, report, _ = saddle_run
        jsonschema.validate(report, cli._schema("report.schema.json"))
        assert report["notes"]

    def test_golden_svg(self, saddle_run):
        _, _, svg = saddle_run
        assert svg.read_text() == (GOLDEN / "saddle2_block.svg").read_text()

    def test_svg_bands(self, saddle_run):
        text = saddle_run[2].read_text()
        assert '<g id="n_minus" fill="#fb6a4a"' in text
        assert '<g id="n_plus" fill="#74c476"' in text

    def test_replay_is_byte_identical(self, tmp_path, saddle_run):
        _, first, svg1 = saddle_run
        code, second, svg2 = run(tmp_path, "saddle2")
        assert code == 0
        assert cli.dumps(first) == cli.dumps(second)
        assert svg1.read_bytes() == svg2.read_bytes()

    def test_json_mirror(self, tmp_path, saddle_run):
        mirror = Path(cli.__file__).parent / "scenarios" / "saddle2.json"
        code, report, _ = run(tmp_path, str(mirror))
        assert code == 0
        assert cli.dumps(report) == cli.dumps(saddle_run[1])

    def test_bad_theta(self, tmp_path, capsys):
        code, report, _ = run(tmp_path, "doublewell2_bad_theta")
        assert code == 1
        split = stage(report, "split")
        assert split["status"] == "fail" and split["error"]["type"] == "TransversalityFailed"
        assert split["error"]["witnesses"]
        assert stage(report, "compat")["status"] == "skipped"
        assert "TransversalityFailed" in capsys.readouterr().out

    def test_coarse_override(self, tmp_path):
        code, report, _ = run(tmp_path, "doublewell2", "--override", "grid.res=8")
        assert code == 1
        assert report["inputs"]["grid"]["res"] == [8, 8]
        errors = {s.get("error", {}).get("type") for s in report["stages"]}
        assert errors & {"BlockFailed", "NotCellular"}

    def test_stage_override(self, tmp_path):
        code, report, _ = run(tmp_path, "sink2", "--override", "stages.pair.T=1.0")
        assert code == 0 and stage(report, "pair")["params"]["T"] == 1.0


def write_scenario(tmp_path, text):
    p = tmp_path / "scenario.toml"
    p.write_text(text)
    return str(p)


BASE = """schema_version = {v}
name = "tiny"
[field]
kind = "SINK2"
[grid]
lo = [-1.0, -1.0]
hi = [1.0, 1.0]
res = 16
[[stages]]
id = "whole"
kind = "isolate"
{extra}
"""


class TestScenarioErrors:
    def test_wrong_version(self, tmp_path):
        assert cli.main(["run", write_scenario(tmp_path, BASE.format(v=2, extra=""))]) == 2

    def test_unknown_key(self, tmp_path):
        assert cli.main(["run", write_scenario(tmp_path, BASE.format(v=1, extra="colour = 3"))]) == 2

    def test_unparseable(self, tmp_path):
        assert cli.main(["run", write_scenario(tmp_path, "schema_version = = 1")]) == 2

    def test_forward_dependency(self, tmp_path):
        extra = '[[stages]]\nid = "p"\nkind = "pair"\nof = "later"\n'
        assert cli.main(["run", write_scenario(tmp_path, BASE.format(v=1, extra=extra))]) == 2

    def test_duplicate_id(self, tmp_path):
        extra = '[[stages]]\nid = "whole"\nkind = "isolate"\n'
        assert cli.main(["run", write_scenario(tmp_path, BASE.format(v=1, extra=extra))]) == 2

    def test_missing_file(self):
        assert cli.main(["run", "/nonexistent/scenario.toml"]) == 2

    def test_bad_arguments(self):
        assert cli.main(["run"]) == 2
        assert cli.main(["frobnicate"]) == 2

    def test_scalar_res_broadcast(self, tmp_path):
        doc = cli.load_scenario(write_scenario(tmp_path, BASE.format(v=1, extra="")))
        assert doc["grid"]["res"] == [16, 16]


class TestSvg:
    def report(self, dim, sets):
        return {"inputs": {"grid": {"lo": [-1.0] * dim, "hi": [1.0] * dim, "res": [4] * dim},
                           "field": {"kind": "SINK2"}, "flow": {"tau": 0.125}},
                "stages": [{"id": "s", "sets": sets}]}

    def test_empty_stage_is_outline_only(self):
        text = cli.render_svg(self.report(2, {"N": []}), "s")
        assert text.splitlines()[1].startswith("<rect") and len(text.splitlines()) == 3

    def test_three_dimensions(self):
        with pytest.raises(DimUnsupported):
            cli.render_svg(self.report(3, {}), "s")

    def test_one_dimension_ribbon(self, tmp_path):
        code, report, _ = run(tmp_path, "periodic1")
        assert code == 0
        text = cli.render_svg(report, "unfolded")
        assert 'height="80"' in text and "<polyline" in text

    def test_aspect_ratio(self):
        rep = self.report(2, {"N": [[0, 0]]})
        rep["inputs"]["grid"]["hi"] = [3.0, 1.0]
        assert 'height="240"' in cli.render_svg(rep, "s")


@pytest.fixture(scope="module")
def pair_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("sets")
    f = VectorFieldSpec.catalog("SADDLE2")
    g = Grid((-1.0, -1.0), (1.0, 1.0), (32, 32))
    G = transition_graph(f, FlowConfig(tau=0.125), g)
    A = CubeSet.full(g)
    P = conley.build_index_pair_from_preindex(G, A, None, None, 2.0)
    for name, S in (("A", A), ("N", P.N), ("L", P.L), ("E", CubeSet.empty(g))):
        (d / f"{name}.txt").write_text(S.to_text())
    return d


class TestCommands:
    def test_homology(self, pair_files, capsys):
        assert cli.main(["homology", "--n", str(pair_files / "N.txt"), "--l", str(pair_files / "L.txt")]) == 0
        assert json.loads(capsys.readouterr().out) == {"homology": {"1": [1, []]}}

    def test_homology_not_nested(self, pair_files, capsys):
        assert cli.main(["homology", "--n", str(pair_files / "L.txt"), "--l", str(pair_files / "N.txt")]) == 1
        assert json.loads(capsys.readouterr().out)["error"] == "NotNested"

    def test_homology_missing_file(self, pair_files):
        assert cli.main(["homology", "--n", str(pair_files / "missing.txt")]) == 2

    def test_check_pair(self, pair_files, capsys):
        args = ["check-pair", "--a", str(pair_files / "A.txt"), "--n", str(pair_files / "N.txt"),
                "--l", str(pair_files / "L.txt"), "--t", "2.0"]
        assert cli.main(args) == 0
        assert json.loads(capsys.readouterr().out)["passed"]

    def test_check_pair_without_exit_set(self, pair_files, capsys):
        args = ["check-pair", "--a", str(pair_files / "A.txt"), "--n", str(pair_files / "A.txt"),
                "--l", str(pair_files / "E.txt")]
        assert cli.main(args) == 1
        out = json.loads(capsys.readouterr().out)
        assert out["checks"]["exit_through_L"]["pass"] is False

    def test_list(self, capsys):
        assert cli.main(["list"]) == 0
        names = capsys.readouterr().out.split()
        assert "saddle2.toml" in names and "periodic1.toml" in names
