"""TREC-style evaluation and the batch experiment runner.

Qrels are "topic 0 docid grade" lines, topics are JSON lines with id, query
and timestamp, run files are "topic Q0 docid rank score tag" lines. Metrics
are computed with ir_measures: grade >= 1 is relevant for AP and recall, and
NDCG uses the gain 2^grade - 1.
"""
import io
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import ir_measures
import numpy as np
import pandas as pd

from vertfeed.corpus import NEWS_VERTICALS, VerticalConfig, load_jsonl
from vertfeed.costs import CostReport, costs_frame, summarize
from vertfeed.errors import (
    ConfigError,
    CorpusFormatError,
    EmptyQueryError,
    MissingInputError,
    UnknownTopicError,
)
from vertfeed.federation import build_vertical_set
from vertfeed.index import QueryModel, build_index
from vertfeed.pipeline import Collections, ExpansionCorpus, PipelineParams, method_by_key, run_method
from vertfeed.settings import DEFAULT_EVAL_DEPTH, DEFAULT_NDCG_DEPTH, TimeWindow

LOG = logging.getLogger(__name__)

GRADES = (0, 1, 2)
NDCG_GAINS = {grade: 2 ** grade - 1 for grade in GRADES}
METRIC_COLUMNS = ["method", "topic", "map", "ndcg30", "recall1000"]
SWEEP_COLUMNS = ["param", "value", "method", "map", "ndcg30"]


def _measures(depth=DEFAULT_EVAL_DEPTH, k=DEFAULT_NDCG_DEPTH):
    return {
        "map": ir_measures.AP @ depth,
        "ndcg30": ir_measures.nDCG(gains=NDCG_GAINS) @ k,
        "recall1000": ir_measures.R @ depth,
    }


def _nonblank_lines(path):
    """(text of the non-blank lines, their 1-based line numbers)."""
    lines = []
    numbers = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line.strip():
                lines.append(line if line.endswith("\n") else line + "\n")
                numbers.append(line_number)
    return "".join(lines), numbers


class Qrels:
    """Graded judgments: topic -> {doc id: grade}."""

    def __init__(self, judgments=None):
        self._judgments = {}
        for topic, docs in (judgments or {}).items():
            for doc_id, grade in docs.items():
                self.add(topic, doc_id, grade)

    def add(self, topic, doc_id, grade):
        if grade not in GRADES:
            raise ConfigError(f"relevance grade must be 0, 1 or 2, got {grade!r}")
        self._judgments.setdefault(str(topic), {})[str(doc_id)] = int(grade)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise MissingInputError("qrels", path)
        text, numbers = _nonblank_lines(path)
        qrels = cls()
        parsed = 0
        try:
            for qrel in ir_measures.read_trec_qrels(io.StringIO(text)):
                if qrel.relevance not in GRADES:
                    raise CorpusFormatError(path, numbers[parsed], f"grade must be 0, 1 or 2, got {qrel.relevance}")
                qrels.add(qrel.query_id, qrel.doc_id, qrel.relevance)
                parsed += 1
        except ValueError as e:
            raise CorpusFormatError(path, numbers[parsed], f"expected 'topic 0 docid grade': {e}") from e
        LOG.info("Loaded qrels for %d topics from %s", len(qrels.topics), path)
        return qrels

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            for topic, docs in self._judgments.items():
                for doc_id, grade in docs.items():
                    f.write(f"{topic} 0 {doc_id} {grade}\n")

    @property
    def topics(self):
        return list(self._judgments)

    def judgments(self, topic):
        try:
            return self._judgments[str(topic)]
        except KeyError:
            raise UnknownTopicError(topic) from None

    def grade(self, topic, doc_id):
        return self.judgments(topic).get(doc_id, 0)

    def relevant(self, topic):
        return {doc_id for doc_id, grade in self.judgments(topic).items() if grade >= 1}

    def num_relevant(self, topic):
        return len(self.relevant(topic))

    def __contains__(self, topic):
        return str(topic) in self._judgments


@dataclass(frozen=True)
class Topic:
    topic_id: str
    query: str
    timestamp: int

    def to_json(self):
        return json.dumps({"id": self.topic_id, "query": self.query, "timestamp": self.timestamp},
                          ensure_ascii=False)


def load_topics(path):
    """Read topics from a JSON-lines file; every topic needs a timestamp."""
    path = Path(path)
    if not path.exists():
        raise MissingInputError("topics", path)
    topics = []
    with path.open("r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(path, line_number, f"invalid JSON: {e.msg}") from e
            for key in ("id", "query", "timestamp"):
                if key not in record:
                    raise CorpusFormatError(path, line_number, f"missing field {key!r}")
            timestamp = record["timestamp"]
            if isinstance(timestamp, bool) or not isinstance(timestamp, int) or timestamp < 0:
                raise CorpusFormatError(path, line_number, "timestamp must be a non-negative integer")
            topics.append(Topic(str(record["id"]), str(record["query"]), timestamp))
    return topics


def write_topics(topics, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(t.to_json() + "\n" for t in topics), encoding="utf-8")


@dataclass(frozen=True)
class RunRow:
    topic: str
    doc_id: str
    rank: int
    score: float
    tag: str


@dataclass
class RunFile:
    """Run rows; per topic, ranks are 1..n and scores never increase with rank."""
    rows: list = field(default_factory=list)

    def __post_init__(self):
        for topic, rows in self._by_topic().items():
            for expected, row in enumerate(rows, start=1):
                if row.rank != expected:
                    raise ConfigError(f"topic {topic}: ranks must be contiguous from 1")
            for prev, cur in zip(rows, rows[1:]):
                if cur.score > prev.score:
                    raise ConfigError(f"topic {topic}: scores increase at rank {cur.rank}")

    def _by_topic(self):
        grouped = {}
        for row in self.rows:
            grouped.setdefault(row.topic, []).append(row)
        return grouped

    @classmethod
    def from_rankings(cls, rankings, tag):
        """rankings: topic -> [ScoredDoc]."""
        rows = [RunRow(str(topic), doc.doc_id, rank, doc.score, tag)
                for topic, ranking in rankings.items()
                for rank, doc in enumerate(ranking, start=1)]
        return cls(rows)

    def rankings(self):
        """topic -> [doc id] in rank order."""
        return {topic: [row.doc_id for row in rows] for topic, rows in self._by_topic().items()}

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            for row in self.rows:
                f.write(f"{row.topic} Q0 {row.doc_id} {row.rank} {row.score!r} {row.tag}\n")

    @classmethod
    def read(cls, path, tag=None):
        """Read a run file with ir_measures.

        ir_measures keeps topic, doc id and score only: ranks follow file order
        within a topic and the tag defaults to the file name without suffix.
        """
        path = Path(path)
        if not path.exists():
            raise MissingInputError("run file", path)
        tag = tag or path.stem
        text, numbers = _nonblank_lines(path)
        rows = []
        ranks = {}
        try:
            for doc in ir_measures.read_trec_run(io.StringIO(text)):
                ranks[doc.query_id] = ranks.get(doc.query_id, 0) + 1
                rows.append(RunRow(doc.query_id, doc.doc_id, ranks[doc.query_id], float(doc.score), tag))
        except ValueError as e:
            raise CorpusFormatError(path, numbers[len(rows)], f"expected 'topic Q0 docid rank score tag': {e}") from e
        return cls(rows)


def _doc_ids(ranking):
    return [doc if isinstance(doc, str) else doc.doc_id for doc in ranking]


def score_rankings(rankings, qrels, measures=None):
    """Evaluate many rankings in one ir_measures pass.

    The run handed to ir_measures scores documents by position, so the
    evaluated order is exactly the given ranking.

    Args:
        rankings: topic -> [doc id or ScoredDoc]
        qrels: Qrels holding every topic
        measures: column name -> ir_measures measure (AP@1000, nDCG@30, R@1000 by default)

    Returns:
        topic -> {column name: value}; topics without relevant documents or
        with an empty ranking score 0.0

    Raises:
        UnknownTopicError: a topic has no judgments
    """
    measures = measures or _measures()
    columns = {measure: name for name, measure in measures.items()}
    results = {}
    keys = {}
    judged = {}
    run = {}
    for topic, ranking in rankings.items():
        judgments = qrels.judgments(topic)
        results[topic] = dict.fromkeys(measures, 0.0)
        doc_ids = [str(doc_id) for doc_id in _doc_ids(ranking)]
        if not doc_ids or not any(grade >= 1 for grade in judgments.values()):
            continue
        key = str(topic)
        keys[key] = topic
        judged[key] = dict(judgments)
        run[key] = {doc_id: float(len(doc_ids) - i) for i, doc_id in enumerate(doc_ids)}
    if run:
        for metric in ir_measures.iter_calc(list(measures.values()), judged, run):
            name = columns.get(metric.measure)
            if name is not None:
                results[keys[metric.query_id]][name] = float(metric.value)
    return results


def _score_one(ranking, qrels, topic, name, measure):
    return score_rankings({topic: ranking}, qrels, {name: measure})[topic][name]


def average_precision(ranking, qrels, topic, depth=DEFAULT_EVAL_DEPTH):
    """Binary AP over the top depth documents; 0.0 when the topic has no relevant documents."""
    return _score_one(ranking, qrels, topic, "map", ir_measures.AP @ depth)


def ndcg_at_k(ranking, qrels, topic, k=DEFAULT_NDCG_DEPTH):
    """NDCG@k with gain 2^grade - 1 and discount log2(i + 1)."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    return _score_one(ranking, qrels, topic, "ndcg", ir_measures.nDCG(gains=NDCG_GAINS) @ k)


def recall_at_depth(ranking, qrels, topic, depth=DEFAULT_EVAL_DEPTH):
    return _score_one(ranking, qrels, topic, "recall", ir_measures.R @ depth)


def relevant_overlap(qrels, expansion_ids):
    """Per topic, how many relevant target documents also occur in the expansion corpus."""
    expansion_ids = set(expansion_ids)
    rows = []
    for topic in qrels.topics:
        relevant = qrels.relevant(topic)
        rows.append({"topic": topic, "relevant": len(relevant),
                     "relevant_in_expansion_corpus": len(relevant & expansion_ids)})
    return pd.DataFrame(rows, columns=["topic", "relevant", "relevant_in_expansion_corpus"])


@dataclass
class MethodRun:
    """Everything one method produced over a topic set."""
    method: str
    rankings: dict = field(default_factory=dict)
    costs: list = field(default_factory=list)
    selections: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)


def run_topics(method_key, topics, collections, params):
    method = method_by_key(method_key)
    result = MethodRun(method.name)
    for topic in topics:
        started = time.perf_counter()
        try:
            outcome = run_method(method, QueryModel.from_text(topic.query), topic.timestamp, collections, params)
        except EmptyQueryError:
            LOG.warning("Topic %s has no query terms; emitting an empty ranking", topic.topic_id)
            result.rankings[topic.topic_id] = []
            result.costs.append(CostReport(method.name, topic.topic_id))
            continue
        result.seconds[topic.topic_id] = time.perf_counter() - started
        result.rankings[topic.topic_id] = outcome.ranking
        result.costs.append(outcome.cost.labelled(method.name, topic.topic_id))
        if outcome.selection is not None:
            result.selections[topic.topic_id] = outcome.selection.verticals
    LOG.info("%s: ran %d topics", method.name, len(topics))
    return result


def metrics_frame(runs, qrels):
    """Per-topic metric rows; topics without relevant documents are left out.

    Returns:
        (DataFrame, set of excluded topic ids)
    """
    rows = []
    excluded = set()
    for run in runs:
        judged = {}
        for topic, ranking in run.rankings.items():
            if topic not in qrels or qrels.num_relevant(topic) == 0:
                excluded.add(topic)
                continue
            judged[topic] = ranking
        scores = score_rankings(judged, qrels)
        rows.extend({"method": run.method, "topic": topic, **scores[topic]} for topic in judged)
    if excluded:
        LOG.warning("Excluded %d topics without relevant documents from metric means", len(excluded))
    return pd.DataFrame(rows, columns=METRIC_COLUMNS), excluded


def summary_frame(runs, metrics, excluded, baseline):
    costs = summarize([report for run in runs for report in run.costs], baseline)
    means = metrics.groupby("method", sort=False)[["map", "ndcg30", "recall1000"]].mean().reset_index()
    summary = pd.merge(means, costs, on="method", how="right")
    selected = {run.method: float(np.mean([len(v) for v in run.selections.values()]))
                for run in runs if run.selections}
    summary["selected_verticals"] = summary["method"].map(selected)
    summary["excluded_topics"] = len(excluded)
    return summary


def selection_frame(runs):
    rows = [{"method": run.method, "topic": topic, "verticals": " ".join(verticals), "count": len(verticals)}
            for run in runs for topic, verticals in run.selections.items()]
    return pd.DataFrame(rows, columns=["method", "topic", "verticals", "count"])


def timings_frame(runs):
    rows = [{"method": run.method, "topic": topic, "seconds": seconds}
            for run in runs for topic, seconds in run.seconds.items()]
    return pd.DataFrame(rows, columns=["method", "topic", "seconds"])


def _require(value, name):
    if value is None:
        raise MissingInputError(name)
    return value


def load_collections(config):
    """Build the indexes the configured methods need.

    Raises:
        MissingInputError: a corpus a requested method depends on is not configured
    """
    methods = [method_by_key(key) for key in config.methods]
    target = build_index(load_jsonl(_require(config.corpus, "target corpus")))
    LOG.info("Indexed target corpus: %d documents", target.doc_count)
    news = None
    if any(m.uses_news for m in methods):
        if config.verticals is not None:
            cfg = VerticalConfig.load(config.verticals)
        else:
            LOG.info("No vertical config given; using the nine-vertical news mapping")
            cfg = VerticalConfig.from_mapping({"verticals": NEWS_VERTICALS})
        vs = build_vertical_set(load_jsonl(_require(config.news, "news corpus")), cfg)
        news = ExpansionCorpus(vs, config.csi_rate, config.csi_seed, config.expansion.mu)
    external = None
    if any(m.feedback == "external" for m in methods):
        external = build_index(load_jsonl(_require(config.external, "external corpus")))
    return Collections(target, news, external)


def _sweep_windows(config):
    base = config.window
    for value in config.sweep_values:
        if config.sweep_param == "age":
            yield value, TimeWindow(age=int(value), span=base.span)
        else:
            yield value, TimeWindow(age=base.age, span=None if value is None else int(value))


def sweep_frame(config, topics, collections, qrels):
    """MAP and NDCG@30 per method for each swept window value."""
    rows = []
    for value, window in _sweep_windows(config):
        params = PipelineParams.from_config(config.with_overrides({"window": window}))
        runs = [run_topics(key, topics, collections, params) for key in config.methods]
        metrics, _ = metrics_frame(runs, qrels)
        means = metrics.groupby("method", sort=False)[["map", "ndcg30"]].mean()
        for run in runs:
            entry = means.loc[run.method] if run.method in means.index else None
            rows.append({
                "param": config.sweep_param,
                "value": value,
                "method": run.method,
                "map": float("nan") if entry is None else float(entry["map"]),
                "ndcg30": float("nan") if entry is None else float(entry["ndcg30"]),
            })
        LOG.info("Sweep %s=%s done", config.sweep_param, value)
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


@dataclass
class ExperimentResult:
    runs: list
    metrics: pd.DataFrame
    costs: pd.DataFrame
    summary: pd.DataFrame
    selection: pd.DataFrame
    sweep: pd.DataFrame | None = None
    overlap: pd.DataFrame | None = None
    files: list = field(default_factory=list)


def run_experiment(config, collections=None):
    """Run every configured method over every topic and write runs and reports.

    Layout under config.output: runs/<method key>.run and reports/*.csv.

    Args:
        config: ExperimentConfig
        collections: prebuilt Collections (built from config paths when None)

    Returns:
        ExperimentResult
    """
    if not config.methods:
        raise ConfigError("no methods configured")
    qrels = Qrels.load(_require(config.qrels, "qrels"))
    topics = load_topics(_require(config.topics, "topics"))
    collections = collections or load_collections(config)
    params = PipelineParams.from_config(config)

    runs = [run_topics(key, topics, collections, params) for key in config.methods]
    metrics, excluded = metrics_frame(runs, qrels)
    costs = costs_frame([report for run in runs for report in run.costs])
    baseline = config.baseline if config.baseline in {run.method for run in runs} else None
    result = ExperimentResult(runs, metrics, costs, summary_frame(runs, metrics, excluded, baseline),
                              selection_frame(runs))
    if config.sweep_param is not None and config.sweep_values:
        result.sweep = sweep_frame(config, topics, collections, qrels)
    if collections.news is not None:
        result.overlap = relevant_overlap(qrels, collections.news.verticals.vertical_of)

    output = Path(config.output)
    for key, run in zip(config.methods, runs):
        path = output / "runs" / f"{key}.run"
        RunFile.from_rankings(run.rankings, key).write(path)
        result.files.append(path)
    reports = output / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    tables = {
        "metrics.csv": result.metrics,
        "costs.csv": result.costs,
        "summary.csv": result.summary,
        "selection.csv": result.selection,
        "timings.csv": timings_frame(runs),
        "sweep.csv": result.sweep,
        "overlap.csv": result.overlap,
    }
    for name, frame in tables.items():
        if frame is None:
            continue
        frame.to_csv(reports / name, index=False)
        result.files.append(reports / name)
    LOG.info("Wrote %d files under %s", len(result.files), output)
    return result
