"""End-to-end command line checks: exit codes, report schemas, input
diagnostics, CSV emission, and byte-for-byte determinism."""

import filecmp
import json
import math

import pytest

from resonance_atlas.cli import (AnalysisConfig, Tolerances, main,
                                 parse_graph, parse_points, validate)
from resonance_atlas.rootfind import SearchRect

PAIR = {"centers": [[0, 0, 0], [1, 0, 0]], "strengths": [0, 0]}
LASSO = {"vertices": [0], "edges": [{"u": 0, "v": 0, "length": 1.0}],
         "leads": [{"v": 0, "count": 1}], "coupling": "kirchhoff"}
SLAB = {"breakpoints": [0.0, 1.0], "permittivities": [1.0, 4.0, 1.0]}
PI_LOOP = {"vertices": [0, 1],
           "edges": [{"u": 0, "v": 1, "length": 1.0},
                     {"u": 1, "v": 1, "length": math.pi}],
           "leads": [{"v": 1, "count": 1}], "coupling": "kirchhoff"}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj), encoding="utf-8")
    return str(p)


def run_json(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, json.loads(captured.out)


class TestExitCodes:
    def test_missing_input_file(self, tmp_path, capsys):
        code = main(["analyze-points", "--input",
                     str(tmp_path / "nope.json")])
        assert code == 2
        assert "no such file" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{{{", encoding="utf-8")
        code = main(["analyze-points", "--input", str(p)])
        assert code == 2
        assert "malformed JSON" in capsys.readouterr().err

    def test_no_input_given(self, capsys):
        assert main(["analyze-points"]) == 2
        assert "no input" in capsys.readouterr().err

    def test_bad_rect_flag(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        code = main(["analyze-points", "--input", p,
                     "--tasks", "resonances", "--rect", "1,2,3"])
        assert code == 2
        assert "x0,x1,y0,y1" in capsys.readouterr().err

    def test_unknown_task(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        code = main(["analyze-points", "--input", p, "--tasks", "bogus"])
        assert code == 2
        assert "unknown task" in capsys.readouterr().err

    def test_search_task_requires_rect(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        code = main(["analyze-points", "--input", p,
                     "--tasks", "resonances"])
        assert code == 2
        assert "require --rect" in capsys.readouterr().err

    def test_nonpositive_tolerance(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        code = main(["analyze-points", "--input", p, "--tol-root", "0"])
        assert code == 2
        assert "must be positive" in capsys.readouterr().err

    def test_duplicate_centers(self, tmp_path, capsys):
        p = write(tmp_path, "dup.json",
                  {"centers": [[0, 0, 0], [0, 0, 0]], "strengths": [0, 0]})
        code = main(["analyze-points", "--input", p])
        assert code == 2
        assert "distinct" in capsys.readouterr().err

    def test_nonunitary_coupling_matrix(self, tmp_path, capsys):
        bad = dict(LASSO)
        bad["coupling"] = {"0": [[[1, 0], [0, 0], [0, 0]],
                                 [[0, 0], [1, 0], [0, 0]],
                                 [[0, 0], [0, 0], [2, 0]]]}
        p = write(tmp_path, "badU.json", bad)
        code = main(["analyze-graph", "--input", p])
        assert code == 2
        assert "not unitary" in capsys.readouterr().err

    def test_incommensurable_lattice_request(self, tmp_path, capsys):
        p = write(tmp_path, "piloop.json", PI_LOOP)
        code = main(["analyze-graph", "--input", p, "--tasks", "chains",
                     "--rect", "0.5,7,-2,0.5"])
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_incommensurable_diagram_still_works(self, tmp_path, capsys):
        # Only the exact-lattice tasks need commensurable lengths.
        p = write(tmp_path, "piloop.json", PI_LOOP)
        code, rep = run_json(capsys, ["analyze-graph", "--input", p,
                                      "--tasks", "diagram"])
        assert code == 0
        assert "diagram" in rep
        assert "commensurable" not in rep

    def test_missing_subcommand(self, capsys):
        with pytest.raises(SystemExit):
            main([])


class TestPointsReports:
    def test_diagram_to_stdout(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        code, rep = run_json(capsys, ["analyze-points", "--input", p])
        assert code == 0
        assert rep["kind"] == "points"
        assert rep["tasks"] == ["diagram"]
        assert rep["effective_size"] == pytest.approx(2.0)
        assert rep["oracle_relative_error"] <= 1e-9
        assert rep["diagnostics"] == []
        assert rep["diagram"]["M"] == 1

    def test_structure_fields(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        code, rep = run_json(capsys, ["analyze-points", "--input", p,
                                      "--tasks", "structure"])
        assert code == 0
        s = rep["structure"]
        assert s["A3"] is True
        assert s["A4"] is True
        assert s["A5"] is True
        assert s["A6"] is None
        assert s["diameter"] == pytest.approx(1.0)
        assert s["r_narrow"] == 2
        assert s["sizes"] == pytest.approx([0.0, 1.0, 2.0])

    def test_resonances_and_chains(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        code, rep = run_json(capsys, ["analyze-points", "--input", p,
                                      "--tasks", "resonances,chains",
                                      "--rect", "0,9,-4,0.05"])
        assert code == 0
        ms = rep["resonances"][0]
        assert ms["total"] == 3
        assert ms["zeros"][0]["k"] == pytest.approx(
            [1.3372357014, -0.3181315052], abs=1e-6)
        match = rep["chains"][0]
        assert set(match) == {"chains", "unmatched_zeros",
                              "unmatched_predictions"}
        assert len(match["chains"]) == 2
        for ch in match["chains"]:
            assert ch["mu"] == pytest.approx(1.0)
            assert ch["sign"] in (1, -1)
            assert all(m["residual"] >= 0 for m in ch["matched"])
        matched = sum(len(ch["matched"]) for ch in match["chains"])
        assert matched + match["unmatched_zeros"] == 3

    def test_density_fields(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        code, rep = run_json(capsys, ["analyze-points", "--input", p,
                                      "--tasks", "resonances,density",
                                      "--rect", "0,9,-4,0.05"])
        assert code == 0
        d = rep["density"][0]
        assert d["certified_radius"] == pytest.approx(4.0)
        assert d["predicted_jumps"] == [
            {"mu": pytest.approx(1.0),
             "height": pytest.approx(2 / math.pi)}]
        assert len(d["profile"]) >= 2
        assert len(d["fitted_jumps"]) == 1
        assert d["fitted_jumps"][0]["mu"] == pytest.approx(1.0, abs=0.2)

    def test_density_region_must_reach_axis(self, tmp_path, capsys):
        # Mirror counting needs the searched strip to touch the real
        # axis; a short region is reported as an error, not a crash.
        p = write(tmp_path, "pair.json", PAIR)
        code, rep = run_json(capsys, ["analyze-points", "--input", p,
                                      "--tasks", "resonances,density",
                                      "--rect", "0,9,-4,-0.01"])
        assert code == 0
        assert "error" in rep["density"][0]
        assert "axis" in rep["density"][0]["error"]


class TestGraphReports:
    def test_lasso_full_report(self, tmp_path, capsys):
        p = write(tmp_path, "lasso.json", LASSO)
        code, rep = run_json(capsys, [
            "analyze-graph", "--input", p,
            "--tasks", "diagram,structure,resonances,chains",
            "--rect", "0.5,30,-2,0.5"])
        assert code == 0
        terms = rep["determinant"]["terms"]
        assert [t["frequency"] for t in terms] == [0.0, 1.0, 2.0]
        assert [t["coefficients"] for t in terms] == [
            [[3.0, 0.0]], [[-4.0, 0.0]], [[1.0, 0.0]]]
        cls = rep["classification"]
        assert cls["mu_max"] == 0.0
        assert cls["neutral_strip"] is True
        assert cls["segments"] == []
        com = rep["commensurable"]
        assert com["beta"] == pytest.approx(1.0)
        assert com["degrees"] == [0, 1, 2]
        assert com["spurious"] == []
        assert com["embedded"] is True
        assert com["min_modulus"] == pytest.approx(1.0)
        xi = sorted(x["value"][0] for x in com["xi"])
        assert xi == pytest.approx([1.0, 3.0])
        assert rep["resonances"][0]["total"] == 8
        assert rep["lattice_check"]["zeros_checked"] == 8
        assert rep["lattice_check"]["max_distance"] < 1e-8

    def test_dimension_cap_warning(self):
        verts = list(range(7))
        edges = [{"u": i, "v": i + 1, "length": 1.0 + 0.1 * i}
                 for i in range(6)]
        g = parse_graph({"vertices": verts, "edges": edges,
                         "leads": [{"v": 0, "count": 1}]})
        cfg = AnalysisConfig("graph", g, (), Tolerances(), ("diagram",))
        assert g.dim == 13
        assert "dimension-cap" in [d["code"] for d in validate(cfg)]

    def test_near_commensurable_warning(self):
        g = parse_graph({"vertices": [0, 1],
                         "edges": [{"u": 0, "v": 1, "length": 1.0},
                                   {"u": 0, "v": 1,
                                    "length": 1.000000000001}],
                         "leads": [{"v": 0, "count": 1}]})
        cfg = AnalysisConfig("graph", g, (), Tolerances(), ("diagram",))
        diags = validate(cfg)
        assert [d["code"] for d in diags] == ["near-commensurable"]
        assert all(d["severity"] == "warning" for d in diags)


class TestCrystalReports:
    def test_slab_full_report(self, tmp_path, capsys):
        p = write(tmp_path, "slab.json", SLAB)
        code, rep = run_json(capsys, ["analyze-crystal", "--input", p,
                                      "--tasks", "resonances",
                                      "--rect", "0.3,8,-1.5,-0.01"])
        assert code == 0
        terms = rep["determinant"]["terms"]
        assert [t["frequency"] for t in terms] == [-2.0, 2.0]
        assert terms[0]["coefficients"] == [[2.25, 0.0]]
        assert terms[1]["coefficients"] == [[-0.25, 0.0]]
        com = rep["commensurable"]
        assert com["beta"] == pytest.approx(4.0)
        assert com["min_modulus"] == pytest.approx(9.0)
        assert [x["mult"] for x in com["xi"]] == [1]
        assert com["xi"][0]["value"][0] == pytest.approx(9.0)
        assert rep["lattice_check"]["max_distance"] < 1e-8
        assert rep["real_resonance_check"]["zeros_on_or_above_axis"] == 0
        ms = rep["resonances"][0]
        assert ms["total"] == 5
        depth = math.log(9.0) / 4.0
        res = [z["k"][0] for z in ms["zeros"]]
        for z in ms["zeros"]:
            assert z["k"][1] == pytest.approx(-depth, abs=1e-6)
        for a, b in zip(res, res[1:]):
            assert b - a == pytest.approx(math.pi / 2, abs=1e-6)


class TestConfigAndOutput:
    def test_config_overrides_flags(self, tmp_path, capsys):
        conf = {"input": PAIR, "tasks": ["diagram"],
                "tolerances": {"root": 1e-10},
                "search": [[0.5, 7.0, -2.0, -0.5]]}
        p = write(tmp_path, "conf.json", conf)
        code, rep = run_json(capsys, ["analyze-points", "--config", p])
        assert code == 0
        assert rep["tolerances"]["root_tol"] == pytest.approx(1e-10)
        assert rep["tolerances"]["freq_tol"] == pytest.approx(1e-9)
        assert rep["search"] == [[0.5, 7.0, -2.0, -0.5]]
        assert rep["tasks"] == ["diagram"]

    def test_unknown_tolerance_key_rejected(self, tmp_path, capsys):
        conf = {"input": PAIR, "tolerances": {"bogus": 1e-10}}
        p = write(tmp_path, "conf.json", conf)
        assert main(["analyze-points", "--config", p]) == 2
        assert "unknown tolerance" in capsys.readouterr().err

    def test_out_dir_and_determinism(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        argv = ["analyze-points", "--input", p,
                "--tasks", "resonances,density", "--rect", "0,9,-4,0.05"]
        out1 = tmp_path / "out1"
        out2 = tmp_path / "out2"
        assert main(argv + ["--out-dir", str(out1)]) == 0
        assert capsys.readouterr().out == ""
        assert main(argv + ["--out-dir", str(out2)]) == 0
        capsys.readouterr()
        names = sorted(f.name for f in out1.iterdir())
        assert names == ["density.csv", "report.json", "resonances.csv"]
        for name in names:
            assert filecmp.cmp(str(out1 / name), str(out2 / name),
                               shallow=False), name
        res = (out1 / "resonances.csv").read_text().splitlines()
        assert res[0] == "re,im,multiplicity"
        assert len(res) == 1 + 3
        dens = (out1 / "density.csv").read_text().splitlines()
        assert dens[0] == "mu,gamma,R,count"
        assert len(dens) > 1
        # The stdout report matches the written file byte for byte.
        code, _ = run_json(capsys, argv)
        assert code == 0

    def test_stdout_matches_written_report(self, tmp_path, capsys):
        p = write(tmp_path, "pair.json", PAIR)
        argv = ["analyze-points", "--input", p,
                "--tasks", "resonances", "--rect", "0,9,-4,0.05"]
        out = tmp_path / "out"
        assert main(argv + ["--out-dir", str(out)]) == 0
        capsys.readouterr()
        assert main(argv) == 0
        text = capsys.readouterr().out
        assert text == (out / "report.json").read_text()
