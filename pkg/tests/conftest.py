import json

import pytest

from vertfeed.corpus import Document, VerticalConfig, news_vertical_config
from vertfeed.federation import build_vertical_set
from vertfeed.index import build_index
from vertfeed.synthetic import clustered_benchmark, random_news_corpus

DAY = 86_400


def doc(doc_id, text, source="cnn", timestamp=1_000_000):
    return Document.from_text(doc_id, timestamp, source, text)


@pytest.fixture
def tiny_docs():
    return [
        doc("d1", "apple banana apple", "cnn"),
        doc("d2", "banana cherry", "espn"),
        doc("d3", "cherry apple durian", "wired"),
        doc("d4", "elderberry fig", "nasa"),
    ]


@pytest.fixture
def tiny_index(tiny_docs):
    return build_index(tiny_docs)


@pytest.fixture
def news_config():
    return news_vertical_config()


@pytest.fixture
def two_verticals():
    return VerticalConfig({"sport": frozenset({"espn"}), "tech": frozenset({"wired"})}, default="other")


@pytest.fixture
def small_vertical_set():
    docs, cfg = random_news_corpus(seed=7, n_docs=400)
    return build_vertical_set(docs, cfg)


@pytest.fixture
def small_benchmark():
    return clustered_benchmark(seed=3, news_docs=600, target_docs=200, n_topics=6)


@pytest.fixture
def write_jsonl_lines(tmp_path):
    def write(name, records):
        path = tmp_path / name
        path.write_text("".join(
            (r if isinstance(r, str) else json.dumps(r)) + "\n" for r in records), encoding="utf-8")
        return path
    return write
