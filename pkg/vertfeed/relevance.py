"""Relevance-model (RM3) expansion, interpolation and condensed-list re-ranking."""
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from vertfeed.corpus import STOPWORDS
from vertfeed.errors import EmptyExpansionModelError
from vertfeed.index import PostingsCounter, QueryModel, ScoredDoc, _score_ordinals, retrieve_topk
from vertfeed.settings import ExpansionParams

LOG = logging.getLogger(__name__)

MIN_TERM_LENGTH = 2


@dataclass(frozen=True)
class FeedbackDoc:
    doc_id: str
    score: float
    index: object = field(compare=False, repr=False)


class FeedbackSet:
    """Feedback documents ranked by score descending, doc id ascending."""

    def __init__(self, docs=()):
        self.docs = list(docs)
        seen = set()
        for prev, cur in zip(self.docs, self.docs[1:]):
            if (-prev.score, prev.doc_id) > (-cur.score, cur.doc_id):
                raise ValueError("feedback documents are not in ranking order")
        for doc in self.docs:
            if doc.doc_id in seen:
                raise ValueError(f"duplicate feedback document {doc.doc_id!r}")
            seen.add(doc.doc_id)

    @classmethod
    def from_ranking(cls, ranking, index):
        return cls(FeedbackDoc(d.doc_id, d.score, index) for d in ranking)

    @classmethod
    def merge(cls, parts, k):
        """Union of several feedback lists, re-sorted and truncated to k."""
        merged = sorted((doc for part in parts for doc in part.docs), key=lambda d: (-d.score, d.doc_id))
        return cls(merged[:k])

    @property
    def doc_ids(self):
        return [doc.doc_id for doc in self.docs]

    def __len__(self):
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs)


@dataclass
class PipelineCounters:
    """Postings counters of one query: feedback retrieval and final retrieval."""
    expansion: PostingsCounter = field(default_factory=PostingsCounter)
    final: PostingsCounter = field(default_factory=PostingsCounter)


def feedback_weights(fb):
    """p(q|d) for each feedback document: max-shifted exp of the log-scores, normalized."""
    scores = np.array([doc.score for doc in fb], dtype=np.float64)
    weights = np.exp(scores - scores.max())
    return weights / weights.sum()


def estimate_rm1(fb, num_terms, stop=STOPWORDS):
    """Estimate the expansion model from feedback documents.

    p(w|E) is proportional to sum_d p_mle(w|d) * p(q|d). Stopwords and terms
    shorter than two characters are dropped; the num_terms heaviest terms
    are kept (ties by term) and renormalized.

    Args:
        fb: non-empty FeedbackSet
        num_terms: size of the expansion model
        stop: stopword set

    Returns:
        QueryModel

    Raises:
        EmptyExpansionModelError: no candidate term survives filtering
    """
    if len(fb) == 0:
        raise ValueError("feedback set is empty")
    weights = feedback_weights(fb)
    relevance = Counter()
    for doc, p_q in zip(fb, weights):
        vector = doc.index.term_vector(doc.doc_id)
        length = sum(vector.values())
        if length == 0:
            continue
        for term, tf in vector.items():
            if len(term) < MIN_TERM_LENGTH or term in stop:
                continue
            relevance[term] += (tf / length) * p_q
    kept = sorted(((w, t) for t, w in relevance.items() if w > 0), key=lambda item: (-item[0], item[1]))
    kept = kept[:num_terms]
    if not kept:
        raise EmptyExpansionModelError()
    return QueryModel.from_counts({t: w for w, t in kept})


def interpolate(orig, exp, lam):
    """(1 - lam) * orig + lam * exp over the union vocabulary."""
    if lam == 0.0:
        return orig
    if lam == 1.0:
        return exp
    vocabulary = set(orig) | set(exp)
    return QueryModel.from_counts({
        term: (1.0 - lam) * orig.weight(term) + lam * exp.weight(term) for term in vocabulary
    })


def feedback_retrieval(q, fbindex, k, mu, counter):
    """Top-k feedback documents from one index or the merged top-k of several."""
    indexes = fbindex if isinstance(fbindex, (list, tuple)) else [fbindex]
    parts = [FeedbackSet.from_ranking(retrieve_topk(q, idx, k, mu, counter), idx) for idx in indexes]
    return parts[0] if len(parts) == 1 else FeedbackSet.merge(parts, k)


def expansion_model(q, fb, params):
    """Final query model for a feedback set; falls back to the query when feedback is unusable."""
    if len(fb) == 0:
        LOG.warning("Empty feedback set for query %s; using the original query", q.terms)
        return q
    try:
        exp = estimate_rm1(fb, params.num_terms)
    except EmptyExpansionModelError:
        LOG.warning("Empty expansion model for query %s; using the original query", q.terms)
        return q
    return interpolate(q, exp, params.lam)


def expand_and_rerun(q, fbindex, target, params=None, counters=None):
    """The full PRF pipeline: feedback retrieval, RM3, final retrieval on target.

    Args:
        q: original query model
        fbindex: feedback index, or a list of indexes whose top-k are merged
        target: index searched with the final query
        params: ExpansionParams
        counters: PipelineCounters receiving C_QE and the final retrieval cost

    Returns:
        (ranking, final query model)
    """
    params = params or ExpansionParams()
    counters = counters if counters is not None else PipelineCounters()
    fb = feedback_retrieval(q, fbindex, params.k, params.mu, counters.expansion)
    final_model = expansion_model(q, fb, params)
    ranking = retrieve_topk(final_model, target, params.depth, params.mu, counters.final)
    return ranking, final_model


def clrm_rerank(initial, final_model, target, mu):
    """Re-score exactly the documents of an initial ranking with the final query model.

    No postings are charged: the document set is fixed by the initial list.
    """
    if not initial:
        return []
    ordinals = np.array(sorted(target.ordinal(doc.doc_id) for doc in initial), dtype=np.int64)
    scores = _score_ordinals(final_model, ordinals, target, mu)
    order = np.lexsort((ordinals, -scores))
    return [ScoredDoc(target.doc_ids[ordinals[i]], float(scores[i])) for i in order]


def condensed_list_expansion(q, target, params=None, counters=None, t_q=None):
    """CLRM: initial retrieval, RM3 from its top-k, re-rank the initial list.

    When t_q is given, feedback comes from the top-k initial documents with
    timestamp <= t_q.

    Returns:
        (ranking, final query model); counters.expansion holds the initial retrieval
        cost and counters.final stays at zero.
    """
    params = params or ExpansionParams()
    counters = counters if counters is not None else PipelineCounters()
    initial = retrieve_topk(q, target, params.depth, params.mu, counters.expansion)
    admitted = initial if t_q is None else [
        d for d in initial if target.timestamps[target.ordinal(d.doc_id)] <= t_q]
    fb = FeedbackSet.from_ranking(admitted[:params.k], target)
    final_model = expansion_model(q, fb, params)
    if final_model is q:
        return initial, q
    return clrm_rerank(initial, final_model, target, params.mu), final_model
