"""Resource selection: which verticals to search for a query.

Sample-based selectors (CRCS, Rank-S) rank the centralized sample index and
charge its postings as selection cost. Taily works from per-vertical term
statistics only and charges one look-up per vertical.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats as scipy_stats

from vertfeed.index import PostingsCounter, retrieve_topk
from vertfeed.settings import DEFAULT_MU, CrcsParams, RankSParams, TailyParams

LOG = logging.getLogger(__name__)

THRESHOLD_XTOL = 1e-12
MAX_BRACKET_DOUBLINGS = 200


@dataclass(frozen=True)
class SelectionResult:
    """Selected verticals in selection order, plus the selection cost C_SEL.

    ``scores`` holds the per-vertical value the selector ranked by (CRCS
    score, Rank-S vote or Taily estimate); ``threshold`` is Taily's score
    cut-off.
    """
    verticals: tuple
    cost: int
    scores: dict = field(default_factory=dict)
    threshold: float | None = None

    def __len__(self):
        return len(self.verticals)


def _largest(sizes, m):
    return tuple(sorted(sizes, key=lambda name: (-sizes[name], name))[:m])


def _rank_csi(q, csi, gamma, mu, counter):
    local = PostingsCounter()
    ranking = retrieve_topk(q, csi.index, gamma, mu, local) if len(csi) else []
    counter.add(local.accessed)
    return ranking, local.accessed


def crcs_select(q, csi, p=CrcsParams(), counter=None, mu=DEFAULT_MU):
    """Central-rank-based selection of a fixed number m of verticals.

    S(V) = (N_V / s_V) * sum over sampled top-gamma docs d of V of (gamma - rank(d)),
    rank 0-based. The m best scores win, ties by name; zero-score verticals
    pad the selection up to m.
    """
    counter = counter if counter is not None else PostingsCounter()
    m = min(p.m, len(csi.vertical_sizes))
    ranking, cost = _rank_csi(q, csi, p.gamma, mu, counter)
    if not ranking:
        LOG.warning("Empty CSI ranking for query %s; selecting the %d largest verticals", q.terms, m)
        return SelectionResult(_largest(csi.vertical_sizes, m), cost)
    votes = {name: 0.0 for name in csi.vertical_sizes}
    for rank, doc in enumerate(ranking):
        votes[csi.vertical_of[doc.doc_id]] += p.gamma - rank
    scores = {}
    for name, vote in votes.items():
        sample = csi.sample_sizes.get(name, 0)
        scores[name] = 0.0 if sample == 0 else csi.vertical_sizes[name] / sample * vote
    chosen = sorted(scores, key=lambda name: (-scores[name], name))[:m]
    return SelectionResult(tuple(chosen), cost, scores)


def ranks_select(q, csi, p=RankSParams(), counter=None, mu=DEFAULT_MU):
    """Rank-S: exponentially decaying votes of the sampled top-gamma documents.

    Log-scores become positive weights through a softmax over the top-gamma
    list; vote(V) = sum of weight(d) * B^(-rank(d)). Verticals whose vote
    exceeds min_ranks are selected, best first; otherwise the single best.
    """
    counter = counter if counter is not None else PostingsCounter()
    ranking, cost = _rank_csi(q, csi, p.gamma, mu, counter)
    if not ranking:
        LOG.warning("Empty CSI ranking for query %s; selecting the largest vertical", q.terms)
        return SelectionResult(_largest(csi.vertical_sizes, 1), cost)
    scores = np.array([doc.score for doc in ranking], dtype=np.float64)
    weights = np.exp(scores - scores.max())
    weights /= weights.sum()
    votes = {name: 0.0 for name in csi.vertical_sizes}
    for rank, (doc, weight) in enumerate(zip(ranking, weights)):
        votes[csi.vertical_of[doc.doc_id]] += float(weight) * p.base ** (-rank)
    ordered = sorted(votes, key=lambda name: (-votes[name], name))
    chosen = [name for name in ordered if votes[name] > p.min_ranks]
    return SelectionResult(tuple(chosen or ordered[:1]), cost, votes)


@dataclass(frozen=True)
class TermStats:
    df: int
    mean: float
    var: float


@dataclass(frozen=True)
class TailyStats:
    """Per-vertical term statistics of the score contribution x(t, d).

    Attributes:
        terms: vertical -> term -> TermStats
        doc_counts: vertical -> N_V, in vertical-set order
        mu: smoothing mass the statistics were computed with
        max_doc_len: longest document of the vertical set (fixes p_floor)
    """
    terms: dict
    doc_counts: dict
    mu: float
    max_doc_len: int

    def get(self, vertical, term):
        return self.terms.get(vertical, {}).get(term)

    @property
    def entry_count(self):
        return sum(len(entries) for entries in self.terms.values())

    def rows(self):
        for vertical, entries in self.terms.items():
            for term, s in entries.items():
                yield vertical, term, s.df, s.mean, s.var


def taily_build(vs, mu=DEFAULT_MU, terms=None):
    """Collect df, mean and variance of x(t, d) = ln p(t|d) - ln p_floor(t).

    p(t|d) is the Dirichlet estimate under the global snapshot and
    p_floor(t) = mu p(t|BG) / (max doc length + mu), so x >= 0.

    Args:
        vs: VerticalSet
        mu: smoothing mass
        terms: optional iterable restricting the terms collected
    """
    max_len = vs.max_doc_len
    wanted = None if terms is None else set(terms)
    collected = {}
    for name, idx in vs.items():
        entries = {}
        vocabulary = idx.vocabulary if wanted is None else [t for t in wanted if t in idx]
        lengths = idx.lengths.astype(np.float64)
        for term in vocabulary:
            p_bg = vs.global_stats.prob(term)
            if p_bg is None:
                continue
            docs, tfs = idx.postings(term)
            log_floor = math.log(mu * p_bg / (max_len + mu))
            x = np.log((tfs + mu * p_bg) / (lengths[docs] + mu)) - log_floor
            x = np.maximum(x, 0.0)
            entries[term] = TermStats(int(len(docs)), float(x.mean()), float(x.var()))
        collected[name] = entries
    taily = TailyStats(collected, vs.sizes(), float(mu), int(max_len))
    LOG.info("Built Taily statistics: %d entries over %d verticals", taily.entry_count, len(collected))
    return taily


@dataclass(frozen=True)
class VerticalScoreModel:
    """Gamma model of the query-score distribution of one vertical."""
    candidates: float
    mean: float
    var: float

    def survival(self, s):
        """P(score > s)."""
        if self.candidates == 0 or self.mean <= 0:
            return 0.0
        if self.var <= 0:
            return 1.0 if self.mean > s else 0.0
        shape = self.mean ** 2 / self.var
        scale = self.var / self.mean
        return float(scipy_stats.gamma.sf(s, shape, scale=scale))

    def estimate(self, s):
        return self.candidates * self.survival(s)


def vertical_score_models(q, stats):
    """Fit one VerticalScoreModel per vertical from the query terms it contains."""
    models = {}
    for name, n_docs in stats.doc_counts.items():
        present = [s for s in (stats.get(name, term) for term in q) if s is not None]
        if not present or n_docs == 0:
            models[name] = VerticalScoreModel(0.0, 0.0, 0.0)
            continue
        missing = 1.0
        for s in present:
            missing *= 1.0 - s.df / n_docs
        models[name] = VerticalScoreModel(
            n_docs * (1.0 - missing),
            sum(s.mean for s in present),
            sum(s.var for s in present),
        )
    return models


def taily_threshold(models, n):
    """The score s* with sum_V n_V P(score_V > s*) = n, or 0 when fewer than n candidates exist."""
    def excess(s):
        return sum(m.estimate(s) for m in models.values()) - n

    if excess(0.0) <= 0:
        return 0.0
    hi = max(m.mean + 10.0 * math.sqrt(m.var) for m in models.values() if m.candidates > 0)
    hi = max(hi, 1e-9)
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if excess(hi) <= 0:
            break
        hi *= 2.0
    return float(optimize.brentq(excess, 0.0, hi, xtol=THRESHOLD_XTOL))


def taily_select(q, stats, p=TailyParams()):
    """Select verticals whose estimated share of the global top-n is at least v."""
    cost = len(stats.doc_counts)
    models = vertical_score_models(q, stats)
    if all(m.candidates == 0 for m in models.values()):
        LOG.warning("No query term of %s occurs in any vertical; selecting the largest vertical", q.terms)
        return SelectionResult(_largest(stats.doc_counts, 1), cost)
    threshold = taily_threshold(models, p.n)
    estimates = {name: m.estimate(threshold) for name, m in models.items()}
    ordered = sorted(estimates, key=lambda name: (-estimates[name], -models[name].candidates, name))
    chosen = [name for name in ordered if estimates[name] >= p.v]
    return SelectionResult(tuple(chosen or ordered[:1]), cost, estimates, threshold)


SELECTORS = ("crcs1", "crcs2", "crcs3", "ranks", "taily")


def select(selector, q, csi=None, taily=None, params=None, counter=None, mu=DEFAULT_MU):
    """Dispatch a selector by name.

    Args:
        selector: one of SELECTORS
        params: dict with optional "crcs_gamma", "ranks" (RankSParams) and
            "taily" (TailyParams) entries
    """
    params = params or {}
    if selector.startswith("crcs"):
        crcs = CrcsParams(gamma=params.get("crcs_gamma", CrcsParams.gamma), m=int(selector[4:]))
        return crcs_select(q, csi, crcs, counter, mu)
    if selector == "ranks":
        return ranks_select(q, csi, params.get("ranks", RankSParams()), counter, mu)
    if selector == "taily":
        return taily_select(q, taily, params.get("taily", TailyParams()))
    raise ValueError(f"unknown selector {selector!r}")
