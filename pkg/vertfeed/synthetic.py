"""Seeded synthetic benchmarks.

``clustered_benchmark`` builds topically clustered news verticals over
Zipfian vocabularies plus a target collection drawn from the same clusters,
with topics and graded judgments. ``drifting_benchmark`` builds per-topic
news streams whose event vocabulary changes with age, so that older windows
of the expansion corpus stop matching the target collection.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vertfeed.corpus import Document, VerticalConfig, write_jsonl
from vertfeed.evaluation import Qrels, Topic, write_topics

LOG = logging.getLogger(__name__)

DAY = 86_400
START = 1_356_998_400
CLUSTERS = ("general", "politics", "technology", "sports", "music", "movies", "entertainment", "science",
            "breaking")
SOURCES_PER_VERTICAL = 2


@dataclass
class Benchmark:
    news: list
    target: list
    verticals: VerticalConfig
    topics: list
    qrels: Qrels

    def write(self, directory):
        """Write the benchmark as corpus, vertical config, topics and qrels files.

        Returns:
            dict of file role -> path
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "news": directory / "news.jsonl",
            "corpus": directory / "target.jsonl",
            "verticals": directory / "verticals.json",
            "topics": directory / "topics.jsonl",
            "qrels": directory / "qrels.txt",
        }
        write_jsonl(self.news, paths["news"])
        write_jsonl(self.target, paths["corpus"])
        paths["verticals"].write_text(json.dumps(self.verticals.to_mapping(), indent=2) + "\n", encoding="utf-8")
        write_topics(self.topics, paths["topics"])
        self.qrels.write(paths["qrels"])
        LOG.info("Wrote benchmark with %d news and %d target documents to %s",
                 len(self.news), len(self.target), directory)
        return paths


def _vertical_config(names):
    return VerticalConfig({
        name: frozenset(f"{name}desk{i}" for i in range(SOURCES_PER_VERTICAL)) for name in names
    })


def _zipf(size, exponent=1.0):
    weights = 1.0 / np.arange(1, size + 1) ** exponent
    return weights / weights.sum()


def random_news_corpus(seed, n_docs, n_verticals=9, vocab_size=300, max_len=20):
    """Unstructured random documents spread over n_verticals verticals.

    Returns:
        (documents, VerticalConfig)
    """
    rng = np.random.default_rng(seed)
    names = [f"v{i}" for i in range(n_verticals)]
    probs = _zipf(vocab_size)
    docs = []
    for i in range(n_docs):
        vertical = names[rng.integers(n_verticals)]
        length = int(rng.integers(1, max_len + 1))
        words = rng.choice(vocab_size, size=length, p=probs)
        docs.append(Document.from_text(
            f"d{i:06d}", START + int(rng.integers(0, 30 * DAY)),
            f"{vertical}desk{rng.integers(SOURCES_PER_VERTICAL)}",
            " ".join(f"w{w}" for w in words),
        ))
    return docs, _vertical_config(names)


def random_query(rng, vocab_size=300, max_terms=4):
    size = int(rng.integers(1, max_terms + 1))
    return " ".join(f"w{w}" for w in rng.choice(vocab_size, size=size, replace=False))


def clustered_benchmark(seed=0, news_docs=10_000, target_docs=3_000, n_topics=50, vocab_size=150,
                        general_size=15, doc_len=(8, 16), general_per_doc=3, event_terms=6, event_docs=30,
                        mention_docs=20, relevant_per_topic=12, nonrelevant_per_topic=20):
    """Topically clustered news verticals, a target collection and judged topics.

    Every cluster owns a Zipfian vocabulary of its own and all documents add a
    few tokens of a small shared vocabulary. Topic i lives in cluster i mod 9:
    its query is two topic terms plus one shared term. The topic's cluster
    vertical carries event posts (both topic terms and the topic's event
    terms) and posts mentioning a single topic term. In the target, relevant
    documents contain one topic term and the event terms (all of them for
    grade 2, two thirds for grade 1); nonrelevant documents of the same
    cluster contain both topic terms and no event terms, so only expansion
    with the event vocabulary ranks the relevant ones first.
    """
    rng = np.random.default_rng(seed)
    probs = _zipf(vocab_size)
    end = START + 30 * DAY

    def make_doc(doc_id, cluster, extra=(), length=None):
        if length is None:
            length = int(rng.integers(doc_len[0], doc_len[1] + 1))
        topical = [f"{CLUSTERS[cluster]}{w}" for w in rng.choice(vocab_size, size=length, p=probs)]
        general = [f"common{w}" for w in rng.integers(0, general_size, size=general_per_doc)]
        source = f"{CLUSTERS[cluster]}desk{rng.integers(SOURCES_PER_VERTICAL)}"
        return Document.from_text(doc_id, int(rng.integers(START, end)), source,
                                  " ".join(list(extra) + topical + general))

    background = doc_len[0] // 2
    news = [make_doc(f"n{i:06d}", int(rng.integers(len(CLUSTERS)))) for i in range(news_docs)]
    target = [make_doc(f"t{i:06d}", int(rng.integers(len(CLUSTERS)))) for i in range(target_docs)]

    topics = []
    qrels = Qrels()
    for i in range(n_topics):
        cluster = i % len(CLUSTERS)
        terms = [f"{CLUSTERS[cluster]}topic{i}a", f"{CLUSTERS[cluster]}topic{i}b"]
        events = [f"event{i}x{j}" for j in range(event_terms)]
        topic = Topic(f"T{i:03d}", " ".join(terms + [f"common{rng.integers(general_size)}"]), end + DAY)
        topics.append(topic)
        for j in range(event_docs):
            news.append(make_doc(f"e{i:03d}{j:04d}", cluster, terms + events, background))
        for j in range(mention_docs):
            news.append(make_doc(f"m{i:03d}{j:04d}", cluster, [terms[j % 2]]))

        slots = rng.permutation(relevant_per_topic + nonrelevant_per_topic)
        for j, slot in enumerate(slots):
            doc_id = f"r{i:03d}{slot:04d}"
            if j < relevant_per_topic:
                grade = 2 if j % 2 == 0 else 1
                shown = events if grade == 2 else events[:max(1, 2 * event_terms // 3)]
                target.append(make_doc(doc_id, cluster, [terms[j % 2]] + shown, background))
                qrels.add(topic.topic_id, doc_id, grade)
            else:
                target.append(make_doc(doc_id, cluster, terms, background))
    return Benchmark(news, target, _vertical_config(CLUSTERS), topics, qrels)


def drifting_benchmark(seed=0, n_topics=18, days=40, docs_per_day=4, fresh_days=5, event_terms=4,
                       relevant_per_topic=10, nonrelevant_per_topic=30):
    """News streams whose event vocabulary drifts away from the target collection.

    All topics share one query time. News posts younger than fresh_days carry
    the topic's current event terms, which the relevant target documents
    share; older posts carry event terms of their own five-day period that
    never occur in the target. Nonrelevant target documents match the query
    terms equally well but carry unrelated filler terms of the same length.
    """
    rng = np.random.default_rng(seed)
    t_q = START + days * DAY
    news = []
    target = []
    topics = []
    qrels = Qrels()
    for t in range(n_topics):
        vertical = CLUSTERS[t % len(CLUSTERS)]
        query_terms = [f"topic{t}a", f"topic{t}b"]
        fresh = [f"fresh{t}x{j}" for j in range(event_terms)]
        topics.append(Topic(f"D{t:03d}", " ".join(query_terms), t_q))
        for n in range(days * docs_per_day):
            age = int(rng.integers(0, days * DAY))
            if age < fresh_days * DAY:
                events = fresh
            else:
                period = age // (5 * DAY)
                events = [f"stale{t}p{period}x{j}" for j in range(event_terms)]
            news.append(Document.from_text(
                f"n{t:03d}{n:05d}", t_q - age, f"{vertical}desk{rng.integers(SOURCES_PER_VERTICAL)}",
                " ".join(query_terms + events),
            ))
        ids = rng.permutation(relevant_per_topic + nonrelevant_per_topic)
        for j, slot in enumerate(ids):
            doc_id = f"t{t:03d}{slot:04d}"
            if j < relevant_per_topic:
                text = " ".join(query_terms + fresh)
                qrels.add(topics[-1].topic_id, doc_id, 1)
            else:
                text = " ".join(query_terms + [f"filler{t}d{slot}x{k}" for k in range(event_terms)])
            target.append(Document.from_text(doc_id, t_q - int(rng.integers(0, days * DAY)), "archive", text))
    return Benchmark(news, target, _vertical_config(CLUSTERS), topics, qrels)


BENCHMARKS = {"clustered": clustered_benchmark, "drifting": drifting_benchmark}
