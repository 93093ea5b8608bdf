"""SQLite storage for indexes, centralized samples, Taily statistics and manifests.

Each stored object is one database file with a ``meta`` table carrying the
format version and the kind of object. Indexes keep their documents; the
inverted structure is rebuilt on load.
"""
import json
import logging
import os
import sqlite3
from pathlib import Path

from vertfeed.corpus import Document
from vertfeed.errors import IndexFormatError, MissingInputError
from vertfeed.federation import VerticalSet, csi_from_documents
from vertfeed.index import build_index
from vertfeed.selection import TailyStats, TermStats

LOG = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
CSI_NAME = "csi.db"
TAILY_NAME = "taily.db"


class IndexStore:
    """One SQLite file holding a stored object.

    Args:
        db_path: path of the database file
        kind: "index", "csi" or "taily"
    """

    def __init__(self, db_path, kind):
        self.db_path = str(db_path)
        self.kind = kind

    def _connect_db(self, create=False):
        if not create and not os.path.exists(self.db_path):
            raise MissingInputError(f"{self.kind} file", self.db_path)
        try:
            if create:
                os.makedirs(os.path.dirname(os.path.abspath(self.db_path)), exist_ok=True)
                if os.path.exists(self.db_path):
                    os.remove(self.db_path)
            conn = sqlite3.connect(self.db_path)
            conn.execute("CREATE TABLE IF NOT EXISTS META (KEY TEXT PRIMARY KEY NOT NULL, VALUE TEXT NOT NULL)")
            conn.execute("""
            CREATE TABLE IF NOT EXISTS DOCUMENTS (
                ORD INTEGER PRIMARY KEY,
                ID TEXT UNIQUE NOT NULL,
                TIMESTAMP INTEGER NOT NULL,
                SOURCE TEXT NOT NULL,
                TEXT TEXT NOT NULL,
                TOKENS TEXT NOT NULL,
                VERTICAL TEXT
            );""")
            conn.execute("""
            CREATE TABLE IF NOT EXISTS TERM_STATS (
                VERTICAL TEXT NOT NULL,
                TERM TEXT NOT NULL,
                DF INTEGER NOT NULL,
                MEAN REAL NOT NULL,
                VAR REAL NOT NULL,
                PRIMARY KEY (VERTICAL, TERM)
            );""")
            return conn
        except sqlite3.Error as e:
            raise IndexFormatError(f"{self.db_path}: cannot open database: {e}") from e

    def _write_meta(self, conn, meta):
        values = {"format_version": FORMAT_VERSION, "kind": self.kind, **meta}
        conn.executemany(
            "REPLACE INTO META (KEY, VALUE) VALUES (?, ?)",
            [(key, json.dumps(value)) for key, value in values.items()],
        )

    def read_meta(self, conn=None):
        own = conn is None
        conn = conn or self._connect_db()
        try:
            meta = {key: json.loads(value) for key, value in conn.execute("SELECT KEY, VALUE FROM META")}
        except sqlite3.Error as e:
            raise IndexFormatError(f"{self.db_path}: unreadable meta table: {e}") from e
        finally:
            if own:
                conn.close()
        if meta.get("format_version") != FORMAT_VERSION:
            raise IndexFormatError(
                f"{self.db_path}: unsupported format version {meta.get('format_version')!r}")
        if meta.get("kind") != self.kind:
            raise IndexFormatError(f"{self.db_path}: expected a {self.kind} file, found {meta.get('kind')!r}")
        return meta

    def save_documents(self, documents, verticals=None, meta=None):
        """Store documents (optionally with their vertical) and meta values."""
        conn = self._connect_db(create=True)
        try:
            rows = []
            for ordinal, doc in enumerate(documents):
                vertical = None if verticals is None else verticals[doc.id]
                rows.append((ordinal, doc.id, doc.timestamp, doc.source, doc.text, " ".join(doc.tokens), vertical))
            conn.executemany(
                "INSERT INTO DOCUMENTS (ORD, ID, TIMESTAMP, SOURCE, TEXT, TOKENS, VERTICAL) VALUES (?, ?, ?, ?, ?, ?, ?)",
                rows,
            )
            self._write_meta(conn, {"doc_count": len(rows), **(meta or {})})
            conn.commit()
        except sqlite3.Error as e:
            raise IndexFormatError(f"{self.db_path}: cannot write documents: {e}") from e
        finally:
            conn.close()
        LOG.info("Wrote %d documents to %s", len(rows), self.db_path)

    def load_documents(self):
        """Return (meta, documents, {doc id: vertical or None})."""
        conn = self._connect_db()
        try:
            meta = self.read_meta(conn)
            documents = []
            verticals = {}
            cursor = conn.execute("SELECT ID, TIMESTAMP, SOURCE, TEXT, TOKENS, VERTICAL FROM DOCUMENTS ORDER BY ORD")
            for doc_id, timestamp, source, text, tokens, vertical in cursor:
                documents.append(Document(doc_id, timestamp, source, text, tuple(tokens.split())))
                verticals[doc_id] = vertical
        except sqlite3.Error as e:
            raise IndexFormatError(f"{self.db_path}: cannot read documents: {e}") from e
        finally:
            conn.close()
        return meta, documents, verticals

    def save_term_stats(self, rows, meta):
        """Store (vertical, term, df, mean, var) rows."""
        conn = self._connect_db(create=True)
        try:
            conn.executemany("INSERT INTO TERM_STATS (VERTICAL, TERM, DF, MEAN, VAR) VALUES (?, ?, ?, ?, ?)", rows)
            self._write_meta(conn, meta)
            conn.commit()
        except sqlite3.Error as e:
            raise IndexFormatError(f"{self.db_path}: cannot write term statistics: {e}") from e
        finally:
            conn.close()

    def load_term_stats(self):
        conn = self._connect_db()
        try:
            meta = self.read_meta(conn)
            rows = list(conn.execute("SELECT VERTICAL, TERM, DF, MEAN, VAR FROM TERM_STATS"))
        except sqlite3.Error as e:
            raise IndexFormatError(f"{self.db_path}: cannot read term statistics: {e}") from e
        finally:
            conn.close()
        return meta, rows


def save_index(idx, path, meta=None):
    IndexStore(path, "index").save_documents(idx.documents, meta=meta)


def load_index(path):
    """Load a stored InvertedIndex (with its own statistics)."""
    _, documents, _ = IndexStore(path, "index").load_documents()
    return build_index(documents)


def vertical_file_name(name):
    safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)
    return f"vertical_{safe}.db"


def save_vertical_set(vs, directory):
    """Write one index file per vertical plus the manifest.

    Returns:
        Path of the manifest
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, idx in vs.items():
        file_name = vertical_file_name(name)
        save_index(idx, directory / file_name, meta={"vertical": name})
        entries.append({"name": name, "doc_count": idx.doc_count, "file": file_name})
    manifest = {
        "format_version": FORMAT_VERSION,
        "verticals": entries,
        "global": {
            "total_tokens": vs.global_stats.total_tokens,
            "doc_count": vs.global_stats.doc_count,
            "vocabulary_size": vs.global_stats.vocabulary_size,
        },
    }
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    LOG.info("Wrote manifest for %d verticals to %s", len(entries), path)
    return path


def read_manifest(directory):
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise MissingInputError("vertical manifest", path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise IndexFormatError(f"{path}: invalid manifest: {e}") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise IndexFormatError(f"{path}: unsupported format version {manifest.get('format_version')!r}")
    return manifest


def load_vertical_indexes(directory):
    """Return [(vertical name, InvertedIndex)] in manifest order."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    return [(entry["name"], load_index(directory / entry["file"])) for entry in manifest["verticals"]]


def load_vertical_set(directory):
    return VerticalSet(load_vertical_indexes(directory))


def save_csi(csi, path):
    """Store the sampled documents with their owning vertical."""
    IndexStore(path, "csi").save_documents(
        csi.index.documents,
        verticals=csi.vertical_of,
        meta={"rate": csi.rate, "seed": csi.seed, "vertical_sizes": csi.vertical_sizes},
    )


def load_csi(path, vs):
    """Load a stored CSI and attach it to the vertical set it was sampled from.

    Raises:
        IndexFormatError: the stored vertical sizes do not match vs
    """
    store = IndexStore(path, "csi")
    meta, documents, verticals = store.load_documents()
    if meta.get("vertical_sizes") != vs.sizes():
        raise IndexFormatError(f"{store.db_path}: CSI was built over a different vertical set")
    return csi_from_documents(documents, verticals, vs, meta["rate"], meta["seed"])


def save_taily(stats, path):
    IndexStore(path, "taily").save_term_stats(
        list(stats.rows()),
        {"mu": stats.mu, "max_doc_len": stats.max_doc_len, "doc_counts": stats.doc_counts},
    )


def load_taily(path):
    meta, rows = IndexStore(path, "taily").load_term_stats()
    terms = {name: {} for name in meta["doc_counts"]}
    for vertical, term, df, mean, var in rows:
        terms.setdefault(vertical, {})[term] = TermStats(int(df), float(mean), float(var))
    return TailyStats(terms, dict(meta["doc_counts"]), float(meta["mu"]), int(meta["max_doc_len"]))
