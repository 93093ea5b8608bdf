"""Immutable inverted index with Dirichlet-smoothed query-likelihood retrieval.

Postings are numpy arrays of document ordinals and term frequencies. Documents
are numbered in ascending id order, so "ascending ordinal" and "ascending
doc id" are the same tie-break inside an index and across indexes.

Retrieval cost is the number of postings accessed: every posting of every
query term present in the index, i.e. the sum of their document frequencies.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from vertfeed.corpus import tokenize
from vertfeed.errors import ConfigError, DuplicateDocumentError, EmptyQueryError, UnknownDocumentError

LOG = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class BackgroundStats:
    """Collection statistics used for smoothing: cf per term, |C| and N."""
    cf: dict
    total_tokens: int
    doc_count: int

    def prob(self, term):
        """p(t|BG) = cf(t) / |C|, or None when the term is not in the vocabulary."""
        count = self.cf.get(term, 0)
        if count == 0 or self.total_tokens == 0:
            return None
        return count / self.total_tokens

    @property
    def vocabulary_size(self):
        return len(self.cf)

    @classmethod
    def merge(cls, stats):
        """Aggregate several snapshots into one (cf summed term by term)."""
        cf = Counter()
        total = 0
        docs = 0
        for s in stats:
            cf.update(s.cf)
            total += s.total_tokens
            docs += s.doc_count
        return cls(dict(cf), total, docs)


class QueryModel:
    """A probability distribution over terms.

    Iteration is in ascending term order so every scorer sums the per-term
    contributions in the same order.
    """

    def __init__(self, weights):
        if not weights:
            raise EmptyQueryError("query model has no terms")
        for term, weight in weights.items():
            if not weight > 0 or not math.isfinite(weight):
                raise ConfigError(f"query model weight for {term!r} must be positive and finite, got {weight}")
        total = math.fsum(weights.values())
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise ConfigError(f"query model weights must sum to 1, got {total}")
        self._weights = {term: float(weights[term]) for term in sorted(weights)}

    @classmethod
    def from_counts(cls, counts):
        """Normalize non-negative counts (zero entries dropped) into a model."""
        kept = {t: c for t, c in counts.items() if c > 0}
        if not kept:
            raise EmptyQueryError("query model has no terms")
        total = math.fsum(kept.values())
        return cls({t: c / total for t, c in kept.items()})

    @classmethod
    def uniform(cls, terms):
        return cls.from_counts(Counter(terms))

    @classmethod
    def from_text(cls, text):
        """Original query model for raw query text: term counts of the tokenized query, normalized."""
        return cls.uniform(tokenize(text))

    def items(self):
        return self._weights.items()

    @property
    def terms(self):
        return list(self._weights)

    def weight(self, term):
        return self._weights.get(term, 0.0)

    def to_dict(self):
        return dict(self._weights)

    def __len__(self):
        return len(self._weights)

    def __iter__(self):
        return iter(self._weights)

    def __contains__(self, term):
        return term in self._weights

    def __eq__(self, other):
        return isinstance(other, QueryModel) and self._weights == other._weights

    def __repr__(self):
        return f"QueryModel({self._weights!r})"


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float


@dataclass
class PostingsCounter:
    """Accessed-postings tally owned by exactly one retrieval task."""
    accessed: int = 0

    def add(self, count):
        if count < 0:
            raise ValueError("postings count cannot be negative")
        self.accessed += int(count)


class InvertedIndex:
    """Postings, document lengths and collection statistics over a document set.

    Scoring uses ``background``: the index's own statistics, or an injected
    snapshot shared by a federation (see with_background).
    """

    def __init__(self, documents, postings, lengths, stats, background=None):
        self.documents = documents
        self.doc_ids = [doc.id for doc in documents]
        self._ordinals = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}
        self.timestamps = np.array([doc.timestamp for doc in documents], dtype=np.int64)
        self.lengths = lengths
        self._postings = postings
        self.stats = stats
        self.background = stats if background is None else background

    @property
    def doc_count(self):
        return len(self.documents)

    @property
    def total_tokens(self):
        return self.stats.total_tokens

    @property
    def vocabulary(self):
        return self._postings.keys()

    @property
    def max_doc_len(self):
        return int(self.lengths.max()) if len(self.lengths) else 0

    def __contains__(self, term):
        return term in self._postings

    def __len__(self):
        return len(self.documents)

    def df(self, term):
        entry = self._postings.get(term)
        return 0 if entry is None else len(entry[0])

    def cf(self, term):
        return self.stats.cf.get(term, 0)

    def postings(self, term):
        """(ordinals, term frequencies) of a term; empty arrays if absent."""
        entry = self._postings.get(term)
        if entry is None:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        return entry

    def ordinal(self, doc_id):
        try:
            return self._ordinals[doc_id]
        except KeyError:
            raise UnknownDocumentError(doc_id) from None

    def document(self, doc_id):
        return self.documents[self.ordinal(doc_id)]

    def term_vector(self, doc_id):
        """Term frequencies of one document."""
        return Counter(self.document(doc_id).tokens)

    def tf_vector(self, term, ordinals):
        """tf(term, d) for each ordinal in a sorted ordinal array (0 where absent)."""
        docs, tfs = self.postings(term)
        if len(docs) == 0:
            return np.zeros(len(ordinals), dtype=np.int64)
        pos = np.searchsorted(docs, ordinals)
        clipped = np.minimum(pos, len(docs) - 1)
        hit = (pos < len(docs)) & (docs[clipped] == ordinals)
        return np.where(hit, tfs[clipped], 0)

    def with_background(self, background):
        """A view of this index that smooths with another statistics snapshot."""
        return InvertedIndex(self.documents, self._postings, self.lengths, self.stats, background)

    def subset(self, mask):
        """A new index over the documents where mask is true, with recomputed statistics."""
        return build_index(doc for doc, keep in zip(self.documents, mask) if keep)


def build_index(docs):
    """Build an InvertedIndex from a stream of Documents.

    Raises:
        DuplicateDocumentError: two documents share an id
    """
    documents = sorted(docs, key=lambda d: d.id)
    for prev, doc in zip(documents, documents[1:]):
        if prev.id == doc.id:
            raise DuplicateDocumentError(doc.id)
    raw = {}
    cf = Counter()
    lengths = np.zeros(len(documents), dtype=np.int64)
    for ordinal, doc in enumerate(documents):
        lengths[ordinal] = len(doc.tokens)
        for term, tf in Counter(doc.tokens).items():
            raw.setdefault(term, ([], []))
            raw[term][0].append(ordinal)
            raw[term][1].append(tf)
            cf[term] += tf
    postings = {
        term: (np.array(ords, dtype=np.int64), np.array(tfs, dtype=np.int64))
        for term, (ords, tfs) in raw.items()
    }
    stats = BackgroundStats(dict(cf), int(lengths.sum()), len(documents))
    LOG.debug("Indexed %d documents, %d terms, %d tokens", len(documents), len(postings), stats.total_tokens)
    return InvertedIndex(tuple(documents), postings, lengths, stats)


def _score_ordinals(q, ordinals, idx, mu):
    """Query log-likelihood of each document ordinal under Dirichlet smoothing."""
    denom = idx.lengths[ordinals].astype(np.float64) + mu
    scores = np.zeros(len(ordinals), dtype=np.float64)
    for term, weight in q.items():
        p_bg = idx.background.prob(term)
        if p_bg is None:
            continue
        tf = idx.tf_vector(term, ordinals)
        scores += weight * np.log((tf + mu * p_bg) / denom)
    return scores


def score_ql(q, doc_id, idx, mu):
    """Sum over query terms of w_t * ln p(t|d) with Dirichlet smoothing.

    Terms absent from the background vocabulary contribute nothing.

    Raises:
        UnknownDocumentError: doc_id is not in idx
    """
    if not mu > 0:
        raise ConfigError(f"mu must be > 0, got {mu}")
    ordinal = idx.ordinal(doc_id)
    return float(_score_ordinals(q, np.array([ordinal], dtype=np.int64), idx, mu)[0])


def postings_cost(q, idx):
    """Retrieval cost: sum of df(t) over query terms present in idx."""
    return sum(idx.df(term) for term in q if term in idx)


def retrieve_topk(q, idx, k, mu, counter):
    """Top-k documents by query likelihood.

    Candidates are the documents containing at least one query term. Ranking
    is by score descending, then doc id ascending. Every posting of every
    query term is charged to counter.

    Raises:
        EmptyQueryError: q has no terms
    """
    if len(q) == 0:
        raise EmptyQueryError("query model has no terms")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    lists = [idx.postings(term)[0] for term in q if term in idx]
    counter.add(sum(len(docs) for docs in lists))
    if not lists:
        return []
    candidates = np.unique(np.concatenate(lists))
    scores = _score_ordinals(q, candidates, idx, mu)
    order = np.lexsort((candidates, -scores))[:k]
    return [ScoredDoc(idx.doc_ids[candidates[i]], float(scores[i])) for i in order]
