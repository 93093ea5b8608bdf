"""Retrieval methods wired end to end.

A method turns a topic (query text and timestamp) into a final ranking on the
target collection, its final query model and a cost report. Feedback can come
from the target itself, from the news expansion corpus (monolithic or
vertical), or from an external corpus.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from vertfeed.costs import CostReport, assemble_prf_cost, assemble_prvf_cost
from vertfeed.errors import ConfigError
from vertfeed.federation import apply_time_window, build_csi, vertical_feedback
from vertfeed.index import PostingsCounter, QueryModel, retrieve_topk
from vertfeed.relevance import PipelineCounters, condensed_list_expansion, expand_and_rerun, expansion_model
from vertfeed.selection import select, taily_build
from vertfeed.settings import (
    DEFAULT_CRCS_GAMMA,
    DEFAULT_CSI_RATE,
    DEFAULT_CSI_SEED,
    DEFAULT_EXTERNAL_FEEDBACK_DOCS,
    DEFAULT_MU,
    ExpansionParams,
    RankSParams,
    TailyParams,
    TimeWindow,
)

LOG = logging.getLogger(__name__)

WINDOW_CACHE_SIZE = 64


@dataclass(frozen=True)
class Method:
    key: str
    name: str
    kind: str
    feedback: str | None = None
    selector: str | None = None

    @property
    def uses_news(self):
        return self.feedback == "news"

    @property
    def uses_csi(self):
        return self.selector is not None and self.selector != "taily"

    @property
    def uses_taily(self):
        return self.selector == "taily"


METHODS = {m.key: m for m in (
    Method("no-prf", "No-PRF", "no-prf"),
    Method("prf", "PRF", "prf", "target"),
    Method("prf-news", "PRF.news", "prf", "news"),
    Method("prf-wiki", "PRF.wiki", "prf", "external"),
    Method("prvf-crcs1", "PRVF(crcs1)", "prvf", "news", "crcs1"),
    Method("prvf-crcs2", "PRVF(crcs2)", "prvf", "news", "crcs2"),
    Method("prvf-crcs3", "PRVF(crcs3)", "prvf", "news", "crcs3"),
    Method("prvf-ranks", "PRVF(ranks)", "prvf", "news", "ranks"),
    Method("prvf-taily", "PRVF(taily)", "prvf", "news", "taily"),
    Method("clrm", "CLRM", "clrm", "target"),
)}


def method_by_key(key):
    try:
        return METHODS[key]
    except KeyError:
        raise ConfigError(f"unknown method {key!r}; choose from {', '.join(METHODS)}") from None


def method_by_name(name):
    for method in METHODS.values():
        if method.name == name:
            return method
    raise ConfigError(f"unknown method name {name!r}")


@dataclass(frozen=True)
class PipelineParams:
    expansion: ExpansionParams = field(default_factory=ExpansionParams)
    external_feedback_docs: int = DEFAULT_EXTERNAL_FEEDBACK_DOCS
    crcs_gamma: int = DEFAULT_CRCS_GAMMA
    ranks: RankSParams = field(default_factory=RankSParams)
    taily: TailyParams = field(default_factory=TailyParams)
    window: TimeWindow = field(default_factory=TimeWindow)
    workers: int = 1

    @classmethod
    def from_config(cls, config):
        return cls(config.expansion, config.external_feedback_docs, config.crcs_gamma, config.ranks,
                   config.taily, config.window, config.workers)

    def selector_params(self):
        return {"crcs_gamma": self.crcs_gamma, "ranks": self.ranks, "taily": self.taily}


class ExpansionCorpus:
    """The news verticals plus the selection structures built over them.

    The CSI and Taily statistics are built on first use unless stored ones are
    passed in; stored ones fix the sampling rate, seed and mu used for every
    windowed view. ``windowed`` returns the corpus as seen at a query time,
    caching one view per distinct set of admitted documents.

    Raises:
        ConfigError: stored Taily statistics were built with another mu
    """

    def __init__(self, verticals, csi_rate=DEFAULT_CSI_RATE, csi_seed=DEFAULT_CSI_SEED, mu=DEFAULT_MU,
                 csi=None, taily=None):
        self.verticals = verticals
        self.csi_rate = csi_rate
        self.csi_seed = csi_seed
        self.mu = mu
        if csi is not None:
            self.csi_rate = csi.rate
            self.csi_seed = csi.seed
            self.__dict__["csi"] = csi
        if taily is not None:
            if taily.mu != mu:
                raise ConfigError(f"Taily statistics were built with mu={taily.mu}, retrieval uses mu={mu}")
            self.__dict__["taily"] = taily
        self._timestamps = np.sort(np.concatenate(
            [idx.timestamps for _, idx in verticals.items()] or [np.empty(0, dtype=np.int64)]))
        self._views = {}

    @cached_property
    def csi(self):
        return build_csi(self.verticals, self.csi_rate, self.csi_seed)

    @cached_property
    def taily(self):
        return taily_build(self.verticals, self.mu)

    @property
    def union(self):
        return self.verticals.union

    def windowed(self, t_q, window):
        lower, upper = window.bounds(t_q)
        start = 0 if lower is None else int(np.searchsorted(self._timestamps, lower, side="left"))
        stop = int(np.searchsorted(self._timestamps, upper, side="right"))
        if start == 0 and stop == len(self._timestamps):
            return self
        key = (start, stop)
        view = self._views.get(key)
        if view is None:
            if len(self._views) >= WINDOW_CACHE_SIZE:
                self._views.pop(next(iter(self._views)))
            view = ExpansionCorpus(apply_time_window(self.verticals, t_q, window), self.csi_rate, self.csi_seed,
                                   self.mu)
            self._views[key] = view
        return view


@dataclass
class Collections:
    """Everything a method may search: target, news expansion corpus, external corpus."""
    target: object
    news: ExpansionCorpus | None = None
    external: object | None = None


@dataclass(frozen=True)
class MethodOutcome:
    ranking: list
    final_model: QueryModel
    cost: CostReport
    selection: object = None
    feedback: object = None


def _feedback_index(method, collections, t_q, window):
    """The index feedback is drawn from; only documents up to t_q are ever admitted."""
    if method.feedback == "target":
        return apply_time_window(collections.target, t_q)
    if method.feedback == "external":
        if collections.external is None:
            raise ConfigError(f"{method.name} needs an external corpus")
        return apply_time_window(collections.external, t_q)
    if collections.news is None:
        raise ConfigError(f"{method.name} needs the news expansion corpus")
    return collections.news.windowed(t_q, window).union


def run_method(method, query, timestamp, collections, params=PipelineParams()):
    """Run one method for one topic.

    Args:
        method: Method (or its key)
        query: query text, or a ready QueryModel
        timestamp: query time in epoch seconds (drives the time window)
        collections: Collections
        params: PipelineParams

    Returns:
        MethodOutcome
    """
    if isinstance(method, str):
        method = method_by_key(method)
    q = query if isinstance(query, QueryModel) else QueryModel.from_text(query)
    exp = params.expansion
    target = collections.target

    if method.kind == "no-prf":
        counter = PostingsCounter()
        ranking = retrieve_topk(q, target, exp.depth, exp.mu, counter)
        return MethodOutcome(ranking, q, assemble_prf_cost(0, counter.accessed))

    if method.kind == "clrm":
        counters = PipelineCounters()
        ranking, final_model = condensed_list_expansion(q, target, exp, counters, timestamp)
        return MethodOutcome(ranking, final_model, assemble_prf_cost(counters.expansion.accessed, 0))

    if method.kind == "prf":
        fbindex = _feedback_index(method, collections, timestamp, params.window)
        if method.feedback == "external":
            exp = replace(exp, k=params.external_feedback_docs)
        counters = PipelineCounters()
        ranking, final_model = expand_and_rerun(q, fbindex, target, exp, counters)
        return MethodOutcome(ranking, final_model,
                             assemble_prf_cost(counters.expansion.accessed, counters.final.accessed))

    if method.kind == "prvf":
        if collections.news is None:
            raise ConfigError(f"{method.name} needs the news expansion corpus")
        corpus = collections.news.windowed(timestamp, params.window)
        if method.uses_taily and corpus.mu != exp.mu:
            raise ConfigError(f"Taily statistics use mu={corpus.mu}, retrieval uses mu={exp.mu}")
        selection = select(
            method.selector, q,
            csi=corpus.csi if method.uses_csi else None,
            taily=corpus.taily if method.uses_taily else None,
            params=params.selector_params(),
            mu=exp.mu,
        )
        per_vertical = {}
        fb = vertical_feedback(q, corpus.verticals, selection, exp.k, exp.mu, per_vertical, params.workers)
        final_model = expansion_model(q, fb, exp)
        final_counter = PostingsCounter()
        ranking = retrieve_topk(final_model, target, exp.depth, exp.mu, final_counter)
        cost = assemble_prvf_cost(
            selection.cost, {name: c.accessed for name, c in per_vertical.items()}, final_counter.accessed)
        return MethodOutcome(ranking, final_model, cost, selection, fb)

    raise ConfigError(f"unsupported method kind {method.kind!r}")
