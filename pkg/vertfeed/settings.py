"""Defaults, parameter types and configuration loading.

Defaults follow the published experimental setup. A JSON config file can
override them, and command-line flags override the file.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from vertfeed.errors import ConfigError, MissingInputError

LOG = logging.getLogger(__name__)

# Retrieval and expansion
DEFAULT_MU = 2500.0
DEFAULT_FEEDBACK_DOCS = 50
DEFAULT_EXPANSION_TERMS = 20
DEFAULT_LAMBDA = 0.5
DEFAULT_FINAL_DEPTH = 1000
DEFAULT_EXTERNAL_FEEDBACK_DOCS = 10

# Resource selection
DEFAULT_CRCS_GAMMA = 50
DEFAULT_RANKS_BASE = 50.0
DEFAULT_RANKS_THRESHOLD = 1e-6
DEFAULT_RANKS_GAMMA = 50
DEFAULT_TAILY_N = 400
DEFAULT_TAILY_V = 50

# Centralized sample index
DEFAULT_CSI_RATE = 0.12
DEFAULT_CSI_SEED = 0

# Evaluation
DEFAULT_EVAL_DEPTH = 1000
DEFAULT_NDCG_DEPTH = 30
DEFAULT_BASELINE = "PRF.news"

DEFAULT_METHODS = (
    "no-prf",
    "prf",
    "prf-news",
    "prvf-crcs1",
    "prvf-crcs2",
    "prvf-crcs3",
    "prvf-ranks",
    "prvf-taily",
    "clrm",
)

SWEEP_PARAMS = ("age", "span")


@dataclass(frozen=True)
class ExpansionParams:
    """RM3 expansion parameters.

    Attributes:
        k: number of feedback documents
        num_terms: size of the expansion model
        lam: interpolation weight of the expansion model
        mu: Dirichlet smoothing mass
        depth: depth of the final retrieval
    """
    k: int = DEFAULT_FEEDBACK_DOCS
    num_terms: int = DEFAULT_EXPANSION_TERMS
    lam: float = DEFAULT_LAMBDA
    mu: float = DEFAULT_MU
    depth: int = DEFAULT_FINAL_DEPTH

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"feedback depth k must be >= 1, got {self.k}")
        if self.num_terms < 1:
            raise ConfigError(f"num_terms must be >= 1, got {self.num_terms}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if not self.mu > 0:
            raise ConfigError(f"mu must be > 0, got {self.mu}")
        if self.depth < 1:
            raise ConfigError(f"final depth must be >= 1, got {self.depth}")


@dataclass(frozen=True)
class CrcsParams:
    gamma: int = DEFAULT_CRCS_GAMMA
    m: int = 1

    def __post_init__(self):
        if self.gamma < 1:
            raise ConfigError(f"CRCS gamma must be >= 1, got {self.gamma}")
        if self.m < 1:
            raise ConfigError(f"CRCS m must be >= 1, got {self.m}")


@dataclass(frozen=True)
class RankSParams:
    base: float = DEFAULT_RANKS_BASE
    min_ranks: float = DEFAULT_RANKS_THRESHOLD
    gamma: int = DEFAULT_RANKS_GAMMA

    def __post_init__(self):
        if not self.base > 1:
            raise ConfigError(f"Rank-S base must be > 1, got {self.base}")
        if not self.min_ranks > 0:
            raise ConfigError(f"Rank-S threshold must be > 0, got {self.min_ranks}")
        if self.gamma < 1:
            raise ConfigError(f"Rank-S gamma must be >= 1, got {self.gamma}")


@dataclass(frozen=True)
class TailyParams:
    n: int = DEFAULT_TAILY_N
    v: int = DEFAULT_TAILY_V

    def __post_init__(self):
        if self.n < 1 or self.v < 1:
            raise ConfigError(f"Taily n and v must be >= 1, got n={self.n} v={self.v}")


@dataclass(frozen=True)
class TimeWindow:
    """Admits documents with timestamp in [t_q - age - span, t_q - age].

    A span of None leaves the window unbounded towards the past.
    """
    age: int = 0
    span: int | None = None

    def __post_init__(self):
        if self.age < 0:
            raise ConfigError(f"window age must be >= 0, got {self.age}")
        if self.span is not None and self.span <= 0:
            raise ConfigError(f"window span must be > 0 or unbounded, got {self.span}")

    def bounds(self, t_q):
        """Return the inclusive (lower, upper) timestamp bounds for a query time.

        The lower bound is None when the span is unbounded.
        """
        upper = t_q - self.age
        lower = None if self.span is None else upper - self.span
        return lower, upper


@dataclass
class ExperimentConfig:
    """Everything a batch experiment needs.

    Paths may be None when the methods requested do not need them; the
    experiment runner reports the first missing one by name.
    """
    corpus: str | None = None
    news: str | None = None
    verticals: str | None = None
    external: str | None = None
    qrels: str | None = None
    topics: str | None = None
    output: str = "output"
    methods: tuple = DEFAULT_METHODS
    baseline: str = DEFAULT_BASELINE
    expansion: ExpansionParams = field(default_factory=ExpansionParams)
    external_feedback_docs: int = DEFAULT_EXTERNAL_FEEDBACK_DOCS
    crcs_gamma: int = DEFAULT_CRCS_GAMMA
    ranks: RankSParams = field(default_factory=RankSParams)
    taily: TailyParams = field(default_factory=TailyParams)
    window: TimeWindow = field(default_factory=TimeWindow)
    csi_rate: float = DEFAULT_CSI_RATE
    csi_seed: int = DEFAULT_CSI_SEED
    sweep_param: str | None = None
    sweep_values: tuple = ()
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.csi_rate <= 1.0:
            raise ConfigError(f"CSI rate must lie in (0, 1], got {self.csi_rate}")
        if self.external_feedback_docs < 1:
            raise ConfigError("external feedback depth must be >= 1")
        if self.sweep_param is not None and self.sweep_param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {self.sweep_param!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        self.methods = tuple(self.methods)
        self.sweep_values = tuple(self.sweep_values)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_mapping(cls, values):
        """Build a config from a flat or nested mapping, ignoring unknown keys."""
        nested = {
            "expansion": ExpansionParams,
            "ranks": RankSParams,
            "taily": TailyParams,
            "window": TimeWindow,
        }
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            if key not in known:
                LOG.warning("Ignoring unknown config key %r", key)
                continue
            if key in nested:
                if not isinstance(value, dict):
                    raise ConfigError(f"config section {key!r} must be an object, got {value!r}")
                value = _build_nested(nested[key], value)
            kwargs[key] = value
        return _construct(cls, kwargs)

    def with_overrides(self, overrides):
        """Return a copy where every non-None override replaces the current value.

        Keys of the form ``section.field`` update one field of a nested
        parameter object (for example ``expansion.lam``).
        """
        config = self
        for key, value in overrides.items():
            if value is None:
                continue
            if "." in key:
                section, name = key.split(".", 1)
                config = replace(config, **{section: replace(getattr(config, section), **{name: value})})
            else:
                config = replace(config, **{key: value})
        return config


def _build_nested(cls, values):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    for key in sorted(unknown):
        LOG.warning("Ignoring unknown %s key %r", cls.__name__, key)
    return _construct(cls, {k: v for k, v in values.items() if k in known})


def _construct(cls, kwargs):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {cls.__name__} value in {kwargs}: {e}") from e


def load_config(path):
    """Load an ExperimentConfig from a JSON file.

    Args:
        path: path of the JSON config file, or None for pure defaults

    Returns:
        ExperimentConfig
    """
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.exists():
        raise MissingInputError("config file", path)
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return ExperimentConfig.from_mapping(values)


def parse_duration(text):
    """Parse a duration in seconds; 'inf' or 'none' means unbounded (None)."""
    if text is None:
        return None
    value = str(text).strip().lower()
    if value in ("inf", "none", "unbounded", ""):
        return None
    try:
        seconds = float(value)
    except ValueError as e:
        raise ConfigError(f"invalid duration {text!r}") from e
    if math.isinf(seconds):
        return None
    return int(seconds)
