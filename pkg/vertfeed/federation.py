"""Vertical federation: vertical set, centralized sample index, broker fan-out
and time-windowed views of the expansion corpus.

All verticals score with one shared global statistics snapshot, so results
from different verticals merge by plain sorting.
"""
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from vertfeed.corpus import assign_vertical
from vertfeed.errors import ConfigError, VerticalConfigError
from vertfeed.index import BackgroundStats, InvertedIndex, PostingsCounter, build_index, retrieve_topk
from vertfeed.relevance import FeedbackSet
from vertfeed.settings import TimeWindow

LOG = logging.getLogger(__name__)

SAMPLE_RESOLUTION = 1_000_000


class VerticalSet:
    """Ordered vertical indexes sharing one global statistics snapshot.

    Args:
        entries: [(vertical name, InvertedIndex)]; the indexes' own statistics
            are aggregated into the global snapshot, which is then injected
            into every vertical.
    """

    def __init__(self, entries):
        names = [name for name, _ in entries]
        if len(set(names)) != len(names):
            raise VerticalConfigError("vertical names must be unique")
        self.global_stats = BackgroundStats.merge(idx.stats for _, idx in entries)
        self._indexes = {name: idx.with_background(self.global_stats) for name, idx in entries}

    @property
    def names(self):
        return list(self._indexes)

    def items(self):
        return self._indexes.items()

    def index(self, name):
        return self._indexes[name]

    def doc_count(self, name):
        return self._indexes[name].doc_count

    def sizes(self):
        return {name: idx.doc_count for name, idx in self._indexes.items()}

    @property
    def max_doc_len(self):
        return max((idx.max_doc_len for idx in self._indexes.values()), default=0)

    def __len__(self):
        return len(self._indexes)

    @cached_property
    def vertical_of(self):
        return {doc_id: name for name, idx in self._indexes.items() for doc_id in idx.doc_ids}

    @cached_property
    def union(self):
        """Monolithic index over all verticals; its own statistics equal the global snapshot."""
        return build_index(doc for idx in self._indexes.values() for doc in idx.documents)

    @property
    def documents(self):
        return [doc for idx in self._indexes.values() for doc in idx.documents]


def build_vertical_set(docs, cfg):
    """Partition documents into one index per configured vertical.

    Verticals with no documents get an empty index.
    """
    grouped = {name: [] for name in cfg.names}
    for doc in docs:
        grouped.setdefault(assign_vertical(doc, cfg), []).append(doc)
    vs = VerticalSet([(name, build_index(group)) for name, group in grouped.items()])
    LOG.info("Built %d verticals: %s", len(vs), ", ".join(f"{n}={c}" for n, c in vs.sizes().items()))
    return vs


def hash64(seed, doc_id):
    digest = hashlib.blake2b(f"{seed}:{doc_id}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def in_sample(doc_id, rate, seed):
    return hash64(seed, doc_id) % SAMPLE_RESOLUTION < round(rate * SAMPLE_RESOLUTION)


@dataclass(frozen=True)
class CSI:
    """Centralized sample index over all verticals.

    Attributes:
        index: sample index, scoring with the vertical set's global snapshot
        vertical_of: sampled doc id -> owning vertical
        rate: sampling rate in (0, 1]
        seed: sampling seed
        vertical_sizes: N_V for every vertical, in vertical-set order
        sample_sizes: s_V for every vertical
    """
    index: InvertedIndex
    vertical_of: dict
    rate: float
    seed: int
    vertical_sizes: dict
    sample_sizes: dict

    def __len__(self):
        return self.index.doc_count


def build_csi(vs, rate, seed):
    """Sample each document independently by hash(seed, id) and index the sample."""
    if not 0.0 < rate <= 1.0:
        raise ConfigError(f"CSI rate must lie in (0, 1], got {rate}")
    sampled = []
    vertical_of = {}
    sample_sizes = {name: 0 for name in vs.names}
    for name, idx in vs.items():
        for doc in idx.documents:
            if in_sample(doc.id, rate, seed):
                sampled.append(doc)
                vertical_of[doc.id] = name
                sample_sizes[name] += 1
    if not sampled:
        LOG.warning("Centralized sample index is empty (rate=%s, seed=%s)", rate, seed)
    index = build_index(sampled).with_background(vs.global_stats)
    LOG.info("Built CSI with %d of %d documents (rate=%s)", len(sampled), vs.global_stats.doc_count, rate)
    return CSI(index, vertical_of, rate, seed, vs.sizes(), sample_sizes)


def csi_from_documents(documents, vertical_of, vs, rate, seed):
    """Rebuild a stored CSI against a loaded vertical set."""
    index = build_index(documents).with_background(vs.global_stats)
    sample_sizes = {name: 0 for name in vs.names}
    for doc in documents:
        sample_sizes[vertical_of[doc.id]] += 1
    return CSI(index, dict(vertical_of), rate, seed, vs.sizes(), sample_sizes)


def _search_vertical(q, idx, k, mu):
    counter = PostingsCounter()
    ranking = retrieve_topk(q, idx, k, mu, counter)
    return FeedbackSet.from_ranking(ranking, idx), counter


def vertical_feedback(q, vs, sel, k, mu, counters=None, workers=1):
    """Top-k from each selected vertical, merged and truncated to k.

    Args:
        q: original query model
        vs: VerticalSet
        sel: SelectionResult naming the verticals to search
        k: feedback depth
        mu: Dirichlet smoothing mass
        counters: dict filled with one PostingsCounter per searched vertical
        workers: number of threads for the per-vertical searches

    Returns:
        FeedbackSet
    """
    if not sel.verticals:
        raise ValueError("vertical selection is empty")
    counters = counters if counters is not None else {}
    indexes = [vs.index(name) for name in sel.verticals]
    if workers > 1 and len(indexes) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(indexes))) as pool:
            results = list(pool.map(lambda idx: _search_vertical(q, idx, k, mu), indexes))
    else:
        results = [_search_vertical(q, idx, k, mu) for idx in indexes]
    for name, (_, counter) in zip(sel.verticals, results):
        counters[name] = counter
    return FeedbackSet.merge([fb for fb, _ in results], k)


def window_mask(timestamps, t_q, window):
    if t_q < 0:
        raise ConfigError(f"query timestamp must be >= 0, got {t_q}")
    lower, upper = window.bounds(t_q)
    mask = timestamps <= upper
    if lower is not None:
        mask &= timestamps >= lower
    return mask


def apply_time_window(target, t_q, window=TimeWindow()):
    """Restrict an index or a vertical set to the documents a time window admits.

    Statistics are recomputed over the admitted documents only. When every
    document is admitted the input object itself is returned.

    Args:
        target: InvertedIndex or VerticalSet
        t_q: query timestamp (epoch seconds)
        window: TimeWindow

    Returns:
        an object of the same type as target
    """
    if isinstance(target, VerticalSet):
        windowed = [(name, apply_time_window(idx, t_q, window)) for name, idx in target.items()]
        if all(w is idx for (_, w), (_, idx) in zip(windowed, target.items())):
            return target
        return VerticalSet(windowed)
    mask = window_mask(target.timestamps, t_q, window)
    if bool(np.all(mask)):
        return target
    view = target.subset(mask)
    LOG.debug("Time window kept %d of %d documents", view.doc_count, target.doc_count)
    return view
