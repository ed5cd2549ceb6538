import csv
import json

import pytest

from context_fuse import cli
from context_fuse.scene import load_context

QUICK = ["--iterations", "6000", "--burn-in", "1000", "--no-timestamps"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps([["cat", "dog"], ["cat", "dog", "person"], ["cat", "car"]]))
    return p


class TestToy:
    def test_sensor_alone(self, capsys):
        code, out, _ = run(capsys, "toy", "sensor-alone", "--no-timestamps")
        assert code == 0
        assert "P(TRIOZAP | blurry object) = 0.3333" in out

    def test_deterministic_bytes(self, capsys):
        a = run(capsys, "toy", "ohio-full", *QUICK)
        b = run(capsys, "toy", "ohio-full", *QUICK)
        assert a == b

    def test_seed_matters(self, capsys):
        a = run(capsys, "toy", "ohio-full", *QUICK, "--seed", "1")[1]
        b = run(capsys, "toy", "ohio-full", *QUICK, "--seed", "2")[1]
        assert a != b

    def test_json_and_exit_code(self, capsys):
        code, out, _ = run(capsys, "toy", "iowa-full", *QUICK, "--json")
        payload = json.loads(out)
        assert code == (0 if payload["converged"] else 2)
        assert len(payload["geweke_scores"]) == 20
        assert payload["classes"] == ["ACME", "GLOBEX", "TRIOZAP"]

    def test_loose_threshold_converges(self, capsys):
        code, _, _ = run(capsys, "toy", "ohio-full", *QUICK, "--geweke-threshold", "1e6")
        assert code == 0

    def test_timestamps_present_by_default(self, capsys):
        _, out, _ = run(capsys, "toy", "sensor-alone")
        assert "# generated" in out

    def test_chain_csv(self, capsys, tmp_path):
        path = tmp_path / "c.csv"
        run(capsys, "toy", "utah-full", *QUICK, "--thin", "100", "--chain-csv", str(path))
        rows = list(csv.reader(path.open()))
        assert rows[0][0] == "iteration" and len(rows) == 61


class TestFuse:
    def test_single_context_matches_toy(self, capsys):
        _, toy_out, _ = run(capsys, "toy", "ohio-full", *QUICK, "--json")
        _, fuse_out, _ = run(capsys, "fuse", "ohio_scenario.json", *QUICK, "--json")
        assert json.loads(toy_out)["p_triozap"] == json.loads(fuse_out)["query_probability"]

    def test_hyperprior_fixture(self, capsys):
        code, out, _ = run(capsys, "fuse", "hyperprior_scenario.json", *QUICK, "--json")
        payload = json.loads(out)
        assert set(payload["context_weights"]) == {"Iowa", "Ohio", "Utah"}
        assert sum(payload["context_weights"].values()) == pytest.approx(1)
        assert code in (0, 2)

    def test_malformed_json_line_number(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n  "classes": ["a",\n  ]\n}\n')
        code, _, err = run(capsys, "fuse", str(bad))
        assert code == 1
        assert "bad.json:3:" in err

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "fuse", "/nonexistent/x.json")
        assert code == 1 and err.startswith("error:")

    def test_bad_scenario_fields(self, capsys, tmp_path):
        p = tmp_path / "s.json"
        p.write_text(json.dumps({"classes": ["a", "b"], "contexts": []}))
        code, _, err = run(capsys, "fuse", str(p))
        assert code == 1

    def test_bad_query_object(self, capsys, tmp_path):
        payload = json.loads((cli.PACKAGE_DATA / "ohio_scenario.json").read_text())
        payload["query"]["object"] = 9
        p = tmp_path / "s.json"
        p.write_text(json.dumps(payload))
        assert run(capsys, "fuse", str(p))[0] == 1

    def test_context_from_corpus(self, capsys, tmp_path, tiny):
        scenario = {
            "classes": ["car", "cat", "dog", "person"],
            "contexts": [{"corpus": "tiny.json", "name": "home"}],
            "scene": [{"probs": [0, 1, 0, 0], "uncertainty": 0.01},
                      {"probs": [0.25, 0.25, 0.25, 0.25], "uncertainty": 0.3}],
            "query": {"object": 1, "class": "dog"},
        }
        p = tmp_path / "s.json"
        p.write_text(json.dumps(scenario))
        code, out, _ = run(capsys, "fuse", str(p), *QUICK)
        assert code in (0, 2) and "P(dog | object 1)" in out

    def test_data_dir_env(self, capsys, tmp_path, monkeypatch):
        (tmp_path / "mine.json").write_text(
            (cli.PACKAGE_DATA / "ohio_scenario.json").read_text())
        monkeypatch.setenv(cli.DATA_ENV, str(tmp_path))
        assert run(capsys, "fuse", "mine.json", *QUICK)[0] in (0, 2)


class TestLearn:
    def test_native(self, capsys, tmp_path, tiny):
        out_path = tmp_path / "ctx.json"
        code, out, _ = run(capsys, "learn", str(tiny), "-o", str(out_path), "--no-timestamps")
        assert code == 0
        ctx = load_context(out_path)
        assert ctx.mu.tolist() == pytest.approx([1 / 7, 3 / 7, 2 / 7, 1 / 7])

    def test_unknown_supercategory(self, capsys, tmp_path):
        coco = tmp_path / "coco.json"
        coco.write_text(json.dumps({"images": [], "annotations": [],
                                    "categories": [{"id": 1, "name": "dog", "supercategory": "animal"}]}))
        code, _, err = run(capsys, "learn", str(coco), "--coco", "--supercategory", "sports",
                           "-o", str(tmp_path / "o.json"))
        assert code == 1 and "sports" in err

    def test_supercategory_needs_coco(self, capsys, tmp_path, tiny):
        code, _, _ = run(capsys, "learn", str(tiny), "--supercategory", "animal",
                         "-o", str(tmp_path / "o.json"))
        assert code == 1


class TestBn:
    def test_build_then_query(self, capsys, tmp_path, tiny):
        g = tmp_path / "g.json"
        dot = tmp_path / "g.dot"
        assert run(capsys, "bn", "build", str(tiny), "-o", str(g), "--dot", str(dot),
                   "--no-timestamps")[0] == 0
        assert dot.read_text().startswith("digraph")
        code, out, _ = run(capsys, "bn", "query", str(g), "--evidence", "cat", "--query", "dog",
                           "--json")
        assert code == 0
        assert json.loads(out)["probability"] == pytest.approx(2 / 3)

    def test_rank_and_threshold(self, capsys, tmp_path, tiny):
        g = tmp_path / "g.json"
        run(capsys, "bn", "build", str(tiny), "-o", str(g))
        _, out, _ = run(capsys, "bn", "rank", str(g), "--evidence", "cat", "--json")
        assert [r["class"] for r in json.loads(out)["ranking"]] == ["dog", "car", "person"]
        g2 = tmp_path / "g2.json"
        _, out, _ = run(capsys, "bn", "threshold", str(g), "--tau", "1", "-o", str(g2), "--json")
        assert json.loads(out)["oriented"] == [["cat", "dog"]]

    def test_unseen_evidence(self, capsys, tmp_path, tiny):
        g = tmp_path / "g.json"
        run(capsys, "bn", "build", str(tiny), "-o", str(g))
        assert run(capsys, "bn", "query", str(g), "--evidence", "zebra", "--query", "dog")[0] == 1


class TestBench:
    def test_table_and_csv(self, capsys, tmp_path):
        out_csv = tmp_path / "b.csv"
        code, out, _ = run(capsys, "bench", "--iterations", "3000", "--burn-in", "500",
                           "--eta-steps", "0.05", "0.1", "--csv", str(out_csv), "--no-timestamps")
        assert code == 0
        lines = out.splitlines()
        assert "time/iter" in lines[1] and "iter to converge" in lines[1]
        assert len(lines) == 4
        rows = list(csv.DictReader(out_csv.open()))
        assert [r["method"] for r in rows] == ["mh eta=0.05 c=0.05", "mh eta=0.1 c=0.05"]

    def test_deterministic_without_timings(self, capsys):
        argv = ["bench", "--iterations", "3000", "--burn-in", "500", "--no-timestamps"]
        assert run(capsys, *argv) == run(capsys, *argv)
