import math

import ir_measures
import numpy as np
import pandas as pd
import pytest

from vertfeed.errors import ConfigError, CorpusFormatError, MissingInputError, UnknownTopicError
from vertfeed.evaluation import (
    NDCG_GAINS,
    Qrels,
    RunFile,
    RunRow,
    Topic,
    average_precision,
    load_topics,
    ndcg_at_k,
    recall_at_depth,
    relevant_overlap,
    run_experiment,
    score_rankings,
    write_topics,
)
from vertfeed.index import ScoredDoc
from vertfeed.settings import ExperimentConfig


def brute_ap(ranking, grades):
    relevant = [d for d, g in grades.items() if g >= 1]
    if not relevant:
        return 0.0
    precisions = []
    for cut in range(1, len(ranking) + 1):
        if grades.get(ranking[cut - 1], 0) >= 1:
            top = ranking[:cut]
            precisions.append(len([d for d in top if grades.get(d, 0) >= 1]) / cut)
    return sum(precisions) / len(relevant)


def brute_ndcg(ranking, grades, k):
    def dcg(gains):
        return sum(g / math.log(pos + 2, 2) for pos, g in enumerate(gains))
    actual = dcg([2 ** grades.get(d, 0) - 1 for d in ranking[:k]])
    ideal = dcg(sorted((2 ** g - 1 for g in grades.values()), reverse=True)[:k])
    return actual / ideal if ideal > 0 else 0.0


def brute_recall(ranking, grades, depth):
    relevant = {d for d, g in grades.items() if g >= 1}
    if not relevant:
        return 0.0
    return len(relevant.intersection(ranking[:depth])) / len(relevant)


class TestQrels:
    def test_load(self, tmp_path):
        path = tmp_path / "qrels.txt"
        path.write_text("1 0 a 2\n1 0 b 0\n\n2 0 c 1\n", encoding="utf-8")
        qrels = Qrels.load(path)
        assert qrels.topics == ["1", "2"]
        assert qrels.relevant("1") == {"a"}
        assert qrels.grade("1", "b") == 0
        assert qrels.grade("1", "zzz") == 0

    @pytest.mark.parametrize("line", ["1 0 a 3", "1 0 a", "1 0 a high"])
    def test_malformed(self, tmp_path, line):
        path = tmp_path / "qrels.txt"
        path.write_text(line + "\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError):
            Qrels.load(path)

    def test_invalid_grade(self):
        with pytest.raises(ConfigError):
            Qrels({"1": {"a": 5}})

    def test_missing(self, tmp_path):
        with pytest.raises(MissingInputError):
            Qrels.load(tmp_path / "absent.txt")

    def test_write_then_load(self, tmp_path):
        qrels = Qrels({"1": {"a": 2, "b": 0}, "2": {"c": 1}})
        qrels.write(tmp_path / "q.txt")
        loaded = Qrels.load(tmp_path / "q.txt")
        assert loaded.judgments("1") == {"a": 2, "b": 0}
        assert loaded.judgments("2") == {"c": 1}


class TestTopics:
    def test_round_trip(self, tmp_path):
        topics = [Topic("MB1", "storm coast", 1_360_000_000), Topic("MB2", "election", 1_360_000_100)]
        write_topics(topics, tmp_path / "topics.jsonl")
        assert load_topics(tmp_path / "topics.jsonl") == topics

    def test_timestamp_required(self, write_jsonl_lines):
        path = write_jsonl_lines("topics.jsonl", [{"id": "1", "query": "storm"}])
        with pytest.raises(CorpusFormatError):
            load_topics(path)


class TestMetrics:
    @pytest.fixture
    def qrels(self):
        return Qrels({"1": {"a": 1, "b": 1}, "2": {"x": 1}, "3": {"a": 2, "b": 0, "c": 1}, "4": {"a": 0}})

    def test_perfect_ranking(self, qrels):
        assert average_precision(["a", "b", "c"], qrels, "1") == 1.0
        assert ndcg_at_k(["a", "c", "b"], qrels, "3") == pytest.approx(1.0)
        assert recall_at_depth(["b", "a"], qrels, "1") == 1.0

    def test_single_relevant_at_rank_two(self, qrels):
        assert average_precision(["y", "x"], qrels, "2") == 0.5

    def test_graded_toy_case(self, qrels):
        dcg = 3.0 + 0.0 + 1.0 / 2.0
        idcg = 3.0 + 1.0 / math.log2(3)
        assert ndcg_at_k(["a", "b", "c"], qrels, "3", k=3) == pytest.approx(dcg / idcg, abs=1e-12)

    def test_no_relevant(self, qrels):
        assert average_precision(["a"], qrels, "4") == 0.0
        assert ndcg_at_k(["a"], qrels, "4") == 0.0
        assert recall_at_depth(["a"], qrels, "4") == 0.0

    def test_half_recall(self, qrels):
        assert recall_at_depth(["a", "z"], qrels, "1") == 0.5
        assert recall_at_depth(["z", "a", "b"], qrels, "1", depth=2) == 0.5

    def test_scored_docs_accepted(self, qrels):
        assert average_precision([ScoredDoc("a", -1.0), ScoredDoc("b", -2.0)], qrels, "1") == 1.0

    def test_unknown_topic(self, qrels):
        for metric in (average_precision, ndcg_at_k, recall_at_depth):
            with pytest.raises(UnknownTopicError):
                metric(["a"], qrels, "99")

    def test_invalid_k(self, qrels):
        with pytest.raises(ConfigError):
            ndcg_at_k(["a"], qrels, "1", k=0)

    def test_match_brute_force(self):
        rng = np.random.default_rng(0)
        pool = [f"d{i}" for i in range(30)]
        judgments = {}
        rankings = {}
        for trial in range(10_000):
            topic = f"t{trial}"
            judgments[topic] = {str(d): int(rng.integers(0, 3))
                                for d in rng.choice(pool, size=int(rng.integers(1, 15)), replace=False)}
            rankings[topic] = [str(d) for d in rng.choice(pool, size=int(rng.integers(0, 25)), replace=False)]
        qrels = Qrels(judgments)
        cut = {"map": ir_measures.AP @ 5, "ndcg30": ir_measures.nDCG(gains=NDCG_GAINS) @ 5,
               "recall1000": ir_measures.R @ 5}
        full = score_rankings(rankings, qrels)
        shallow = score_rankings(rankings, qrels, cut)
        for topic, ranking in rankings.items():
            grades = judgments[topic]
            assert full[topic]["map"] == pytest.approx(brute_ap(ranking, grades), abs=1e-12)
            assert full[topic]["ndcg30"] == pytest.approx(brute_ndcg(ranking, grades, 30), abs=1e-12)
            assert full[topic]["recall1000"] == pytest.approx(brute_recall(ranking, grades, 1000), abs=1e-12)
            assert shallow[topic]["map"] == pytest.approx(brute_ap(ranking[:5], grades), abs=1e-12)
            assert shallow[topic]["ndcg30"] == pytest.approx(brute_ndcg(ranking, grades, 5), abs=1e-12)
            assert shallow[topic]["recall1000"] == pytest.approx(brute_recall(ranking, grades, 5), abs=1e-12)
            for value in full[topic].values():
                assert 0.0 <= value <= 1.0 + 1e-12

    def test_single_topic_helpers_agree_with_batch(self, qrels):
        ranking = ["c", "b", "a"]
        batch = score_rankings({"3": ranking}, qrels)["3"]
        assert batch["map"] == average_precision(ranking, qrels, "3")
        assert batch["ndcg30"] == ndcg_at_k(ranking, qrels, "3")
        assert batch["recall1000"] == recall_at_depth(ranking, qrels, "3")

    def test_ranking_order_wins_over_equal_scores(self, qrels):
        tied = [ScoredDoc("y", -1.0), ScoredDoc("x", -1.0)]
        assert average_precision(tied, qrels, "2") == 0.5

    def test_permuting_nonrelevant_tail_keeps_ap(self):
        qrels = Qrels({"t": {"a": 1, "c": 1}})
        ranking = ["x", "a", "y", "c", "p", "q", "r"]
        permuted = ranking[:4] + ["r", "p", "q"]
        assert average_precision(ranking, qrels, "t") == average_precision(permuted, qrels, "t")


class TestRunFile:
    def test_round_trip(self, tmp_path):
        run = RunFile.from_rankings({"1": [ScoredDoc("a", -1.5), ScoredDoc("b", -2.25)], "2": []}, "prf")
        run.write(tmp_path / "prf.run")
        loaded = RunFile.read(tmp_path / "prf.run")
        assert loaded == run
        assert loaded.rankings() == {"1": ["a", "b"]}

    def test_line_format(self, tmp_path):
        RunFile.from_rankings({"7": [ScoredDoc("doc", -3.0)]}, "tag").write(tmp_path / "r.run")
        assert (tmp_path / "r.run").read_text() == "7 Q0 doc 1 -3.0 tag\n"

    def test_ranks_must_be_contiguous(self):
        with pytest.raises(ConfigError):
            RunFile([RunRow("1", "a", 1, -1.0, "t"), RunRow("1", "b", 3, -2.0, "t")])

    def test_malformed_line(self, tmp_path):
        (tmp_path / "bad.run").write_text("1 Q0 a 1 -1.0 t\n\n1 Q0 b 2\n")
        with pytest.raises(CorpusFormatError) as e:
            RunFile.read(tmp_path / "bad.run")
        assert e.value.line_number == 3

    def test_scores_must_not_increase(self, tmp_path):
        (tmp_path / "bad.run").write_text("1 Q0 a 1 -2.0 t\n1 Q0 b 2 -1.0 t\n")
        with pytest.raises(ConfigError):
            RunFile.read(tmp_path / "bad.run")


class TestRelevantOverlap:
    def test_counts(self):
        qrels = Qrels({"1": {"a": 1, "b": 2, "c": 0}, "2": {"z": 1}})
        frame = relevant_overlap(qrels, ["a", "c", "q"]).set_index("topic")
        assert frame.loc["1", "relevant"] == 2
        assert frame.loc["1", "relevant_in_expansion_corpus"] == 1
        assert frame.loc["2", "relevant_in_expansion_corpus"] == 0


class TestRunExperiment:
    @pytest.fixture
    def files(self, small_benchmark, tmp_path):
        return small_benchmark.write(tmp_path / "bench")

    def config(self, files, tmp_path, **kwargs):
        return ExperimentConfig(
            corpus=str(files["corpus"]), news=str(files["news"]), verticals=str(files["verticals"]),
            qrels=str(files["qrels"]), topics=str(files["topics"]), output=str(tmp_path / "out"), **kwargs)

    def test_no_prf_has_no_expansion_cost(self, files, tmp_path):
        result = run_experiment(self.config(files, tmp_path, methods=("no-prf",)))
        assert (result.costs["C_QE"] == 0).all()
        assert (result.costs["C_R_final"] > 0).all()
        assert not result.metrics.empty

    def test_reports_and_runs_written(self, files, tmp_path):
        run_experiment(self.config(files, tmp_path, methods=("prf-news", "prvf-taily", "clrm")))
        out = tmp_path / "out"
        for name in ("prf-news", "prvf-taily", "clrm"):
            assert (out / "runs" / f"{name}.run").exists()
        for name in ("metrics", "costs", "summary", "selection", "timings", "overlap"):
            assert (out / "reports" / f"{name}.csv").exists()
        costs = pd.read_csv(out / "reports" / "costs.csv")
        assert (costs["C_VF"] == costs["C_SEL"] + costs["C_VR"]).all()
        summary = pd.read_csv(out / "reports" / "summary.csv").set_index("method")
        assert summary.loc["PRF.news", "C_QE_reduction"] == 0.0
        assert summary.loc["PRVF(taily)", "selected_verticals"] >= 1.0

    def test_clrm_recall_equals_query_likelihood(self, files, tmp_path):
        result = run_experiment(self.config(files, tmp_path, methods=("no-prf", "clrm")))
        recall = result.metrics.pivot(index="topic", columns="method", values="recall1000")
        assert (recall["CLRM"] == recall["No-PRF"]).all()

    def test_sweep(self, files, tmp_path):
        config = self.config(files, tmp_path, methods=("prf-news",), sweep_param="age",
                             sweep_values=(0, 86_400, 10 * 86_400))
        result = run_experiment(config)
        assert list(result.sweep["value"]) == [0, 86_400, 10 * 86_400]
        assert set(result.sweep["param"]) == {"age"}
        assert (tmp_path / "out" / "reports" / "sweep.csv").exists()

    def test_missing_input_is_named(self, files, tmp_path):
        config = self.config(files, tmp_path, methods=("prf-wiki",))
        with pytest.raises(MissingInputError) as e:
            run_experiment(config)
        assert "external corpus" in str(e.value)

    def test_no_methods(self, files, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment(self.config(files, tmp_path, methods=()))
