import json

import pytest

from vertfeed import cli


@pytest.fixture
def files(small_benchmark, tmp_path):
    return small_benchmark.write(tmp_path / "bench")


@pytest.fixture
def indexed(files, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["index", "--news", str(files["news"]), "--verticals", str(files["verticals"]),
                     "--corpus", str(files["corpus"]), "--output", str(out)]) == 0
    capsys.readouterr()
    return out


def output_lines(capsys):
    return capsys.readouterr().out.strip().splitlines()


class TestConfig:
    def test_defaults(self, capsys):
        assert cli.main(["config"]) == 0
        config = json.loads(capsys.readouterr().out)
        assert config["expansion"]["mu"] == 2500.0
        assert config["expansion"]["k"] == 50
        assert config["expansion"]["num_terms"] == 20
        assert config["expansion"]["lam"] == 0.5
        assert config["baseline"] == "PRF.news"

    def test_flags_override_file(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"expansion": {"mu": 1000, "k": 10}, "csi_rate": 0.2}))
        assert cli.main(["config", "--config", str(path), "--fb-docs", "5"]) == 0
        config = json.loads(capsys.readouterr().out)
        assert config["expansion"]["mu"] == 1000
        assert config["expansion"]["k"] == 5
        assert config["csi_rate"] == 0.2

    def test_window_sweep_flags(self, capsys):
        assert cli.main(["config", "--age-seconds", "0", "3600", "--span-seconds", "86400"]) == 0
        config = json.loads(capsys.readouterr().out)
        assert config["sweep_param"] == "age"
        assert config["sweep_values"] == [0, 3600]
        assert config["window"]["span"] == 86400

    def test_wrongly_typed_file_value(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"expansion": {"k": "5"}}))
        assert cli.main(["config", "--config", str(path)]) == 1
        assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error: ConfigError:")


class TestIndex:
    def test_empty_corpus(self, tmp_path, capsys):
        news = tmp_path / "empty.jsonl"
        news.write_text("")
        assert cli.main(["index", "--news", str(news), "--output", str(tmp_path / "out")]) == 0
        lines = output_lines(capsys)
        assert len(lines) == 10
        assert lines[-1] == "total\t0"
        assert len(list((tmp_path / "out" / "indexes").glob("vertical_*.db"))) == 9

    def test_counts(self, indexed, small_benchmark, capsys):
        manifest = json.loads((indexed / "indexes" / "manifest.json").read_text())
        assert sum(e["doc_count"] for e in manifest["verticals"]) == len(small_benchmark.news)
        assert (indexed / "indexes" / "target.db").exists()

    def test_missing_input(self, tmp_path, capsys):
        assert cli.main(["index", "--news", str(tmp_path / "absent.jsonl"), "--output", str(tmp_path)]) == 1
        assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error: MissingInputError:")


class TestQueries:
    def test_expand_taily(self, indexed, small_benchmark, capsys):
        topic = small_benchmark.topics[0]
        assert cli.main(["expand", "--output", str(indexed), "--query", topic.query,
                         "--timestamp", str(topic.timestamp), "--selector", "taily"]) == 0
        lines = output_lines(capsys)
        assert lines[0] == "method: PRVF(taily)"
        assert lines[1].startswith("selected verticals: ")
        cost = json.loads(lines[-1])
        assert cost["C_SEL"] == 9
        assert cost["C_VF"] == cost["C_SEL"] + cost["C_VR"]

    def test_expand_crcs1_selects_one_vertical(self, indexed, small_benchmark, capsys):
        topic = small_benchmark.topics[0]
        assert cli.main(["csi", "--output", str(indexed), "--csi-rate", "0.5"]) == 0
        capsys.readouterr()
        assert cli.main(["expand", "--output", str(indexed), "--query", topic.query,
                         "--timestamp", str(topic.timestamp), "--selector", "crcs1", "--csi-rate", "0.5"]) == 0
        lines = output_lines(capsys)
        assert "," not in lines[1]
        assert len(json.loads(lines[-1])["per_vertical"]) == 1

    def test_stored_csi_rate_must_match_flag(self, indexed, small_benchmark, capsys):
        topic = small_benchmark.topics[0]
        assert cli.main(["csi", "--output", str(indexed), "--csi-rate", "0.5"]) == 0
        capsys.readouterr()
        assert cli.main(["expand", "--output", str(indexed), "--query", topic.query,
                         "--timestamp", str(topic.timestamp), "--selector", "crcs1", "--csi-rate", "0.3"]) == 1
        assert capsys.readouterr().err.strip().splitlines()[-1].startswith("error: ConfigError:")

    def test_stored_taily_mu_must_match_retrieval(self, indexed, small_benchmark, capsys):
        topic = small_benchmark.topics[0]
        assert cli.main(["taily-stats", "--output", str(indexed)]) == 0
        capsys.readouterr()
        assert cli.main(["expand", "--output", str(indexed), "--query", topic.query,
                         "--timestamp", str(topic.timestamp), "--selector", "taily", "--mu", "100"]) == 1
        assert "ConfigError" in capsys.readouterr().err

    def test_search(self, indexed, small_benchmark, capsys):
        topic = small_benchmark.topics[0]
        assert cli.main(["search", "--output", str(indexed), "--query", topic.query,
                         "--timestamp", str(topic.timestamp), "--method", "no-prf", "--top", "5"]) == 0
        lines = output_lines(capsys)
        assert 1 <= len(lines) <= 5
        assert [line.split("\t")[0] for line in lines] == [str(i) for i in range(1, len(lines) + 1)]

    def test_taily_stats(self, indexed, capsys):
        assert cli.main(["taily-stats", "--output", str(indexed)]) == 0
        assert output_lines(capsys)[-1].startswith("entries\t")
        assert (indexed / "indexes" / "taily.db").exists()

    def test_search_without_target_index(self, tmp_path, capsys):
        assert cli.main(["search", "--output", str(tmp_path), "--query", "storm", "--timestamp", "0"]) == 1
        assert "MissingInputError" in capsys.readouterr().err


class TestEvaluate:
    def test_two_methods(self, files, tmp_path, capsys):
        out = tmp_path / "exp"
        assert cli.main(["evaluate", "--corpus", str(files["corpus"]), "--news", str(files["news"]),
                         "--verticals", str(files["verticals"]), "--qrels", str(files["qrels"]),
                         "--topics", str(files["topics"]), "--methods", "prf-news", "prvf-crcs2",
                         "--output", str(out)]) == 0
        tags = set()
        for name in ("prf-news", "prvf-crcs2"):
            lines = (out / "runs" / f"{name}.run").read_text().splitlines()
            tags.update(line.split()[-1] for line in lines)
        assert len(tags) == 2
        assert "PRVF(crcs2)" in capsys.readouterr().out


class TestGenerate:
    def test_drifting(self, tmp_path, capsys):
        assert cli.main(["generate", "--kind", "drifting", "--output", str(tmp_path / "bench")]) == 0
        settings = json.loads((tmp_path / "bench" / "config.json").read_text())
        for key in ("news", "corpus", "verticals", "topics", "qrels"):
            assert (tmp_path / "bench" / f"{settings[key].rsplit('/', 1)[-1]}").exists()
