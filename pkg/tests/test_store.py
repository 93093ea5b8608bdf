import json
import sqlite3

import pytest

from vertfeed.errors import IndexFormatError, MissingInputError
from vertfeed.federation import build_csi, build_vertical_set
from vertfeed.selection import taily_build
from vertfeed.store import (
    MANIFEST_NAME,
    IndexStore,
    load_csi,
    load_index,
    load_taily,
    load_vertical_set,
    read_manifest,
    save_csi,
    save_index,
    save_taily,
    save_vertical_set,
    vertical_file_name,
)
from vertfeed.synthetic import random_news_corpus


class TestIndexFiles:
    def test_round_trip(self, tiny_index, tmp_path):
        save_index(tiny_index, tmp_path / "i.db")
        loaded = load_index(tmp_path / "i.db")
        assert loaded.doc_ids == tiny_index.doc_ids
        assert loaded.stats == tiny_index.stats
        assert list(loaded.timestamps) == list(tiny_index.timestamps)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingInputError):
            load_index(tmp_path / "absent.db")

    def test_wrong_format_version(self, tiny_index, tmp_path):
        path = tmp_path / "i.db"
        save_index(tiny_index, path)
        conn = sqlite3.connect(path)
        conn.execute("UPDATE META SET VALUE = '99' WHERE KEY = 'format_version'")
        conn.commit()
        conn.close()
        with pytest.raises(IndexFormatError):
            load_index(path)

    def test_wrong_kind(self, tiny_index, tmp_path):
        save_index(tiny_index, tmp_path / "i.db")
        with pytest.raises(IndexFormatError):
            IndexStore(tmp_path / "i.db", "csi").read_meta()


class TestVerticalSetFiles:
    @pytest.fixture
    def vertical_set(self):
        docs, cfg = random_news_corpus(seed=2, n_docs=200)
        return build_vertical_set(docs, cfg)

    def test_manifest(self, vertical_set, tmp_path):
        save_vertical_set(vertical_set, tmp_path)
        manifest = read_manifest(tmp_path)
        assert [e["name"] for e in manifest["verticals"]] == vertical_set.names
        assert sum(e["doc_count"] for e in manifest["verticals"]) == 200
        assert manifest["global"]["doc_count"] == 200
        assert (tmp_path / vertical_file_name("v0")).exists()

    def test_manifest_is_deterministic(self, vertical_set, tmp_path):
        save_vertical_set(vertical_set, tmp_path / "a")
        save_vertical_set(vertical_set, tmp_path / "b")
        assert (tmp_path / "a" / MANIFEST_NAME).read_text() == (tmp_path / "b" / MANIFEST_NAME).read_text()

    def test_load_restores_global_statistics(self, vertical_set, tmp_path):
        save_vertical_set(vertical_set, tmp_path)
        loaded = load_vertical_set(tmp_path)
        assert loaded.global_stats == vertical_set.global_stats
        assert loaded.sizes() == vertical_set.sizes()

    def test_manifest_version_checked(self, vertical_set, tmp_path):
        save_vertical_set(vertical_set, tmp_path)
        manifest = json.loads((tmp_path / MANIFEST_NAME).read_text())
        manifest["format_version"] = 2
        (tmp_path / MANIFEST_NAME).write_text(json.dumps(manifest))
        with pytest.raises(IndexFormatError):
            read_manifest(tmp_path)

    def test_vertical_file_name_is_safe(self):
        assert vertical_file_name("movies/tv") == "vertical_movies_tv.db"

    def test_csi_round_trip(self, vertical_set, tmp_path):
        csi = build_csi(vertical_set, 0.25, 4)
        save_csi(csi, tmp_path / "csi.db")
        loaded = load_csi(tmp_path / "csi.db", vertical_set)
        assert loaded.index.doc_ids == csi.index.doc_ids
        assert loaded.vertical_of == csi.vertical_of
        assert loaded.sample_sizes == csi.sample_sizes
        assert (loaded.rate, loaded.seed) == (0.25, 4)

    def test_csi_from_other_vertical_set(self, vertical_set, tmp_path):
        save_csi(build_csi(vertical_set, 0.25, 4), tmp_path / "csi.db")
        docs, cfg = random_news_corpus(seed=3, n_docs=150)
        with pytest.raises(IndexFormatError):
            load_csi(tmp_path / "csi.db", build_vertical_set(docs, cfg))

    def test_taily_round_trip(self, vertical_set, tmp_path):
        stats = taily_build(vertical_set, 2500.0)
        save_taily(stats, tmp_path / "taily.db")
        loaded = load_taily(tmp_path / "taily.db")
        assert loaded.doc_counts == stats.doc_counts
        assert loaded.entry_count == stats.entry_count
        assert loaded.get("v0", "w1") == stats.get("v0", "w1")
        assert loaded.max_doc_len == stats.max_doc_len
