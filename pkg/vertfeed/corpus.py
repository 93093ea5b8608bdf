"""Corpus ingestion: documents, tokenization and vertical assignment."""
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from vertfeed.errors import (
    CorpusFormatError,
    DuplicateDocumentError,
    MissingInputError,
    UnmappedSourceError,
    VerticalConfigError,
)

LOG = logging.getLogger(__name__)

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_TERM_RE = re.compile(r"[^\W_]+")

# Used only when selecting expansion terms, never when indexing.
STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can could did do does doing down during
each few for from further had has have having he her here hers herself him
himself his how i if in into is it its itself just me more most my myself no
nor not now of off on once only or other our ours ourselves out over own rt
same she should so some such than that the their theirs them themselves then
there these they this those through to too under until up very via was we
were what when where which while who whom why will with would you your yours
yourself yourselves new says said get got one also us amp
""".split())

REQUIRED_FIELDS = ("id", "timestamp", "source", "text")


def tokenize(text):
    """Normalize raw post text into index terms.

    URLs and @mentions are removed, hashtag markers dropped (the body is
    kept), everything is lowercased and split on non-alphanumeric runs.
    """
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    return _TERM_RE.findall(text.lower())


@dataclass(frozen=True)
class Document:
    id: str
    timestamp: int
    source: str
    text: str
    tokens: tuple = field(default=())

    @classmethod
    def from_text(cls, doc_id, timestamp, source, text):
        return cls(doc_id, int(timestamp), source, text, tuple(tokenize(text)))

    def to_json(self):
        """Serialize as one JSON-lines record (tokens are recomputed on load)."""
        return json.dumps(
            {"id": self.id, "timestamp": self.timestamp, "source": self.source, "text": self.text},
            ensure_ascii=False,
        )


def _parse_line(line, path, line_number):
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusFormatError(path, line_number, f"invalid JSON: {e.msg}") from e
    if not isinstance(record, dict):
        raise CorpusFormatError(path, line_number, "record is not a JSON object")
    for key in REQUIRED_FIELDS:
        if key not in record:
            raise CorpusFormatError(path, line_number, f"missing field {key!r}")
    doc_id, timestamp, source, text = (record[key] for key in REQUIRED_FIELDS)
    if not isinstance(doc_id, str) or not isinstance(source, str) or not isinstance(text, str):
        raise CorpusFormatError(path, line_number, "id, source and text must be strings")
    if isinstance(timestamp, bool) or not isinstance(timestamp, int):
        raise CorpusFormatError(path, line_number, "timestamp must be an integer")
    if timestamp < 0:
        raise CorpusFormatError(path, line_number, "timestamp must be >= 0")
    return Document.from_text(doc_id, timestamp, source, text)


def load_jsonl(path):
    """Stream Documents from a JSON-lines corpus file, in file order.

    Args:
        path: corpus file; one JSON object per line with id, timestamp,
            source and text. Blank lines are skipped, unknown keys ignored.

    Yields:
        Document

    Raises:
        MissingInputError: the file does not exist
        CorpusFormatError: a line is malformed (the error names the line)
        DuplicateDocumentError: an id occurs twice
    """
    path = Path(path)
    if not path.exists():
        raise MissingInputError("corpus", path)
    seen = set()
    with path.open("r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            doc = _parse_line(line, path, line_number)
            if doc.id in seen:
                raise DuplicateDocumentError(doc.id)
            seen.add(doc.id)
            yield doc


def write_jsonl(docs, path):
    """Write documents as a JSON-lines corpus; returns the number written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as f:
        for doc in docs:
            f.write(doc.to_json() + "\n")
            count += 1
    return count


@dataclass(frozen=True)
class VerticalConfig:
    """Assignment of source handles to verticals."""
    verticals: dict
    default: str | None = None

    def __post_init__(self):
        owner = {}
        for name, sources in self.verticals.items():
            if not isinstance(name, str) or not name:
                raise VerticalConfigError("vertical names must be non-empty strings")
            for source in sources:
                if source in owner and owner[source] != name:
                    raise VerticalConfigError(
                        f"source {source!r} assigned to both {owner[source]!r} and {name!r}")
                owner[source] = name
        if self.default is not None and not self.default:
            raise VerticalConfigError("default vertical name must be non-empty")
        object.__setattr__(self, "_owner", owner)

    @property
    def names(self):
        """Vertical names in configuration order, the default one included."""
        names = list(self.verticals)
        if self.default is not None and self.default not in self.verticals:
            names.append(self.default)
        return names

    def owner_of(self, source):
        return self._owner.get(source)

    @classmethod
    def from_mapping(cls, values):
        if not isinstance(values, dict) or not isinstance(values.get("verticals"), dict):
            raise VerticalConfigError('vertical config must be an object with a "verticals" mapping')
        verticals = {}
        for name, sources in values["verticals"].items():
            if not isinstance(sources, list):
                raise VerticalConfigError(f"sources of vertical {name!r} must be a list")
            verticals[name] = frozenset(sources)
        return cls(verticals, values.get("default"))

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise MissingInputError("vertical config", path)
        try:
            values = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise VerticalConfigError(f"{path}: invalid JSON: {e}") from e
        return cls.from_mapping(values)

    def to_mapping(self):
        return {
            "verticals": {name: sorted(sources) for name, sources in self.verticals.items()},
            "default": self.default,
        }


def assign_vertical(doc, cfg):
    """Return the vertical owning doc.source, falling back to cfg.default."""
    name = cfg.owner_of(doc.source)
    if name is not None:
        return name
    if cfg.default is not None:
        return cfg.default
    raise UnmappedSourceError(doc.source)


# Verticals and their Twitter sources as used for the news expansion corpus.
NEWS_VERTICALS = {
    "general": ["abc", "ap", "bbcnews", "bbcworld", "cbsnews", "cnn", "cnni", "foxnews", "huffingtonpost",
                "latimes", "nprnews", "nytimes", "reuters", "reutersuk", "usatoday", "mashable"],
    "politics": ["huffpostpol", "politico", "theeconomist", "washingtonpost", "wsj"],
    "technology": ["arstechnica", "cnet", "gizmodo", "techcrunch", "wired", "wireduk", "thenextweb",
                   "techrepublic", "gigaom", "macworld"],
    "sports": ["bbcsport", "sinow", "eurosport", "eurosportuktv", "sportscenter", "espn"],
    "music": ["clash_music", "rollingstone", "nme", "spinmagazine", "stereogum", "billboard", "altpress",
              "pitchfork"],
    "movies": ["americancine", "thr", "nytmovies", "bbcfilms", "totalfilm", "guardianfilm", "backstage",
               "empiremagazine", "filmcomment", "timeoutfilm", "sightsoundmag"],
    "entertainment": ["time", "ew", "variety", "vanityfair", "uncutmagazine"],
    "science": ["livescience", "popsci", "wiredscience", "nasa", "natgeo", "newscientist"],
    "breaking": ["bbcbreaking", "breakingnews", "cnnbrk"],
}


def news_vertical_config(default=None):
    """The nine-vertical news configuration."""
    return VerticalConfig.from_mapping({"verticals": NEWS_VERTICALS, "default": default})
