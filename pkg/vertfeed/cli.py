"""Command-line interface: ``main.py <subcommand> [options]``.

Subcommands:
    index        build the vertical indexes (and optionally target/external indexes)
    csi          build the centralized sample index over the verticals
    taily-stats  build the Taily term statistics over the verticals
    expand       show selection, expansion model and costs for one query
    search       print the final ranking of one method for one query
    evaluate     run a batch experiment and write runs and reports
    generate     write a synthetic benchmark
    config       print the effective configuration

Parameters come from the defaults, then the ``--config`` JSON file, then
command-line flags.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from vertfeed.corpus import VerticalConfig, load_jsonl, news_vertical_config
from vertfeed.errors import ConfigError, MissingInputError, VertfeedError
from vertfeed.evaluation import run_experiment
from vertfeed.federation import build_csi, build_vertical_set
from vertfeed.index import QueryModel, build_index
from vertfeed.pipeline import METHODS, Collections, ExpansionCorpus, PipelineParams, method_by_key, run_method
from vertfeed.selection import SELECTORS, taily_build
from vertfeed.settings import TimeWindow, load_config, parse_duration
from vertfeed.store import (
    CSI_NAME,
    TAILY_NAME,
    load_csi,
    load_index,
    load_taily,
    load_vertical_set,
    save_csi,
    save_index,
    save_taily,
    save_vertical_set,
)
from vertfeed.synthetic import BENCHMARKS

LOG = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
TARGET_NAME = "target.db"
EXTERNAL_NAME = "external.db"


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags override its values)")
    common.add_argument("--output", help="output directory (indexes/, runs/, reports/)")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="warnings and errors only")
    return common


def _param_parser():
    params = argparse.ArgumentParser(add_help=False)
    params.add_argument("--mu", type=float, help="Dirichlet smoothing mass")
    params.add_argument("--fb-docs", type=int, help="number of feedback documents k")
    params.add_argument("--fb-terms", type=int, help="number of expansion terms")
    params.add_argument("--lambda", dest="lam", type=float, help="weight of the expansion model")
    params.add_argument("--depth", type=int, help="final retrieval depth")
    params.add_argument("--external-fb-docs", type=int, help="feedback documents from the external corpus")
    params.add_argument("--crcs-gamma", type=int, help="CRCS top-gamma sample documents")
    params.add_argument("--ranks-base", type=float, help="Rank-S base B")
    params.add_argument("--ranks-threshold", type=float, help="Rank-S minimum vote")
    params.add_argument("--ranks-gamma", type=int, help="Rank-S top-gamma sample documents")
    params.add_argument("--taily-n", type=int, help="Taily global rank cut-off n")
    params.add_argument("--taily-v", type=int, help="Taily per-vertical document threshold v")
    params.add_argument("--csi-rate", type=float, help="CSI sampling rate in (0, 1]")
    params.add_argument("--csi-seed", type=int, help="CSI sampling seed")
    params.add_argument("--age-seconds", nargs="+", type=int,
                        help="window age; several values sweep the age")
    params.add_argument("--span-seconds", nargs="+",
                        help="window span ('inf' for unbounded); several values sweep the span")
    params.add_argument("--workers", type=int, help="threads for per-vertical retrieval")
    return params


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vertfeed",
        description="Pseudo-relevance feedback from federated news verticals",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    params = _param_parser()

    p = sub.add_parser("index", parents=[common], help="build vertical indexes")
    p.add_argument("--news", help="news corpus (JSON lines)")
    p.add_argument("--verticals", help="vertical/source config (JSON); default: the nine news verticals")
    p.add_argument("--default-vertical", help="vertical receiving unmapped sources")
    p.add_argument("--corpus", help="target corpus to index as well")
    p.add_argument("--external", help="external feedback corpus to index as well")

    sub.add_parser("csi", parents=[common, params], help="build the centralized sample index")

    sub.add_parser("taily-stats", parents=[common, params], help="build Taily term statistics")

    for name, text in (("expand", "debug one query through a method"), ("search", "rank one query")):
        p = sub.add_parser(name, parents=[common, params], help=text)
        p.add_argument("--query", required=True)
        p.add_argument("--timestamp", type=int, required=True, help="query time in epoch seconds")
        p.add_argument("--method", choices=list(METHODS), default="prvf-taily")
        p.add_argument("--selector", choices=SELECTORS, help="shortcut for --method prvf-<selector>")
        p.add_argument("--top", type=int, default=10, help="rows to print")

    p = sub.add_parser("evaluate", parents=[common, params], help="run a batch experiment")
    p.add_argument("--corpus", help="target corpus (JSON lines)")
    p.add_argument("--news", help="news expansion corpus (JSON lines)")
    p.add_argument("--verticals", help="vertical/source config (JSON)")
    p.add_argument("--external", help="external feedback corpus (JSON lines)")
    p.add_argument("--qrels")
    p.add_argument("--topics")
    p.add_argument("--methods", nargs="+", choices=list(METHODS))
    p.add_argument("--baseline", help="method name costs are compared against")

    p = sub.add_parser("generate", parents=[common], help="write a synthetic benchmark")
    p.add_argument("--kind", choices=list(BENCHMARKS), default="clustered")
    p.add_argument("--seed", type=int, default=0)

    sub.add_parser("config", parents=[common, params], help="print the effective configuration")
    return parser


def _window_overrides(args, config):
    ages = getattr(args, "age_seconds", None) or []
    spans = [parse_duration(s) for s in getattr(args, "span_seconds", None) or []]
    overrides = {}
    window = config.window
    if len(ages) == 1:
        window = TimeWindow(ages[0], window.span)
    if len(spans) == 1:
        window = TimeWindow(window.age, spans[0])
    if window != config.window:
        overrides["window"] = window
    if len(ages) > 1:
        overrides.update(sweep_param="age", sweep_values=tuple(ages))
    elif len(spans) > 1:
        overrides.update(sweep_param="span", sweep_values=tuple(spans))
    return overrides


def effective_config(args):
    """Defaults, then the config file, then flags."""
    config = load_config(args.config)
    def get(name):
        return getattr(args, name, None)

    config = config.with_overrides({
        "corpus": get("corpus"),
        "news": get("news"),
        "verticals": get("verticals"),
        "external": get("external"),
        "qrels": get("qrels"),
        "topics": get("topics"),
        "output": get("output"),
        "methods": None if get("methods") is None else tuple(get("methods")),
        "baseline": get("baseline"),
        "expansion.mu": get("mu"),
        "expansion.k": get("fb_docs"),
        "expansion.num_terms": get("fb_terms"),
        "expansion.lam": get("lam"),
        "expansion.depth": get("depth"),
        "external_feedback_docs": get("external_fb_docs"),
        "crcs_gamma": get("crcs_gamma"),
        "ranks.base": get("ranks_base"),
        "ranks.min_ranks": get("ranks_threshold"),
        "ranks.gamma": get("ranks_gamma"),
        "taily.n": get("taily_n"),
        "taily.v": get("taily_v"),
        "csi_rate": get("csi_rate"),
        "csi_seed": get("csi_seed"),
        "workers": get("workers"),
    })
    return config.with_overrides(_window_overrides(args, config))


def _index_dir(config):
    return Path(config.output) / "indexes"


def cmd_index(args, config):
    directory = _index_dir(config)
    if config.news is None:
        raise MissingInputError("news corpus")
    if config.verticals is not None:
        cfg = VerticalConfig.load(config.verticals)
        if args.default_vertical:
            cfg = VerticalConfig(cfg.verticals, args.default_vertical)
    else:
        cfg = news_vertical_config(args.default_vertical)
    vs = build_vertical_set(load_jsonl(config.news), cfg)
    save_vertical_set(vs, directory)
    for name, count in vs.sizes().items():
        print(f"{name}\t{count}")
    print(f"total\t{vs.global_stats.doc_count}")
    for path, name in ((config.corpus, TARGET_NAME), (config.external, EXTERNAL_NAME)):
        if path is not None:
            idx = build_index(load_jsonl(path))
            save_index(idx, directory / name)
            print(f"{name}\t{idx.doc_count}")
    return 0


def cmd_csi(args, config):
    directory = _index_dir(config)
    vs = load_vertical_set(directory)
    csi = build_csi(vs, config.csi_rate, config.csi_seed)
    save_csi(csi, directory / CSI_NAME)
    for name, count in csi.sample_sizes.items():
        print(f"{name}\t{count}")
    return 0


def cmd_taily_stats(args, config):
    directory = _index_dir(config)
    stats = taily_build(load_vertical_set(directory), config.expansion.mu)
    save_taily(stats, directory / TAILY_NAME)
    print(f"entries\t{stats.entry_count}")
    return 0


def stored_collections(config, csi_rate=None, csi_seed=None):
    """Collections from the index directory; CSI and Taily files are used when present.

    Args:
        config: ExperimentConfig
        csi_rate, csi_seed: values given explicitly on the command line, if any

    Raises:
        MissingInputError: there is no target index
        ConfigError: the stored CSI was sampled with another rate or seed than
            the explicit values, or the stored Taily statistics use another mu
    """
    directory = _index_dir(config)
    if not (directory / TARGET_NAME).exists():
        raise MissingInputError("target index", directory / TARGET_NAME)
    target = load_index(directory / TARGET_NAME)
    news = None
    if (directory / "manifest.json").exists():
        vs = load_vertical_set(directory)
        csi = load_csi(directory / CSI_NAME, vs) if (directory / CSI_NAME).exists() else None
        if csi is not None:
            for name, requested, stored in (("rate", csi_rate, csi.rate), ("seed", csi_seed, csi.seed)):
                if requested is not None and requested != stored:
                    raise ConfigError(f"stored CSI uses {name} {stored}, --csi-{name} asks for {requested}")
        taily = load_taily(directory / TAILY_NAME) if (directory / TAILY_NAME).exists() else None
        news = ExpansionCorpus(vs, config.csi_rate, config.csi_seed, config.expansion.mu, csi=csi, taily=taily)
    external = load_index(directory / EXTERNAL_NAME) if (directory / EXTERNAL_NAME).exists() else None
    return Collections(target, news, external)


def _single_query(args, config):
    method = method_by_key(f"prvf-{args.selector}" if args.selector else args.method)
    collections = stored_collections(config, args.csi_rate, args.csi_seed)
    outcome = run_method(method, QueryModel.from_text(args.query), args.timestamp, collections,
                         PipelineParams.from_config(config))
    return method, outcome


def cmd_expand(args, config):
    method, outcome = _single_query(args, config)
    print(f"method: {method.name}")
    if outcome.selection is not None:
        print(f"selected verticals: {', '.join(outcome.selection.verticals)}")
    terms = sorted(outcome.final_model.items(), key=lambda item: (-item[1], item[0]))
    print(pd.DataFrame(terms, columns=["term", "weight"]).to_string(index=False))
    if outcome.feedback is not None:
        print("feedback documents:")
        for doc in outcome.feedback.docs[:args.top]:
            print(f"  {doc.doc_id}\t{doc.score:.6f}")
    print(json.dumps(outcome.cost.labelled(method.name, "").to_dict(), sort_keys=True))
    return 0


def cmd_search(args, config):
    _, outcome = _single_query(args, config)
    for rank, doc in enumerate(outcome.ranking[:args.top], start=1):
        print(f"{rank}\t{doc.doc_id}\t{doc.score:.6f}")
    return 0


def cmd_evaluate(args, config):
    result = run_experiment(config)
    print(result.summary.to_string(index=False))
    return 0


def cmd_generate(args, config):
    benchmark = BENCHMARKS[args.kind](seed=args.seed)
    paths = benchmark.write(config.output)
    settings = {key: str(path) for key, path in paths.items()}
    settings["output"] = str(Path(config.output) / "experiment")
    (Path(config.output) / "config.json").write_text(json.dumps(settings, indent=2) + "\n", encoding="utf-8")
    for key, path in paths.items():
        print(f"{key}\t{path}")
    return 0


def cmd_config(args, config):
    print(json.dumps(config.to_dict(), indent=2, sort_keys=True, default=list))
    return 0


COMMANDS = {
    "index": cmd_index,
    "csi": cmd_csi,
    "taily-stats": cmd_taily_stats,
    "expand": cmd_expand,
    "search": cmd_search,
    "evaluate": cmd_evaluate,
    "generate": cmd_generate,
    "config": cmd_config,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = effective_config(args)
        return COMMANDS[args.command](args, config)
    except (VertfeedError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
